#pragma once

#include "scholar/answer.hpp"
#include "scholar/canonicalizer.hpp"
#include "scholar/corpus.hpp"
#include "scholar/graph_retriever.hpp"
#include "scholar/providers.hpp"

#include "json.hpp"

#include <cstddef>
#include <string>

namespace scholar {

inline providers::ProviderConfig local_provider(providers::Role role, std::string model_id) {
    providers::ProviderConfig cfg;
    cfg.role = role;
    cfg.model_id = std::move(model_id);
    return cfg;
}

/// Everything an engine or service needs: store location, providers,
/// retrieval parameters and optional resource file overrides (empty path
/// means the embedded default).
struct EngineConfig {
    std::string store_path = "scholar.db";
    int workers = 4;

    /// Chunk and query embeddings for the vector pipeline.
    providers::ProviderConfig embed = local_provider(providers::Role::embed, "local-hash");
    /// Entity surfaces and query keywords for canonicalization and graph retrieval.
    providers::ProviderConfig entity_embed = local_provider(providers::Role::embed, "local-hash");
    providers::ProviderConfig generate = local_provider(providers::Role::generate, "local-template");
    providers::ProviderConfig extract = local_provider(providers::Role::generate, "local-rules");
    providers::ProviderConfig cross_score = local_provider(providers::Role::cross_score, "local-overlap");
    providers::RetryPolicy retry;

    std::size_t k = 8;
    graph::RetrievalParams graph;
    canon::CanonicalizeOptions canonicalize;
    answer::ContextOptions context;
    corpus::ChunkingOptions chunking;

    std::string stopwords_path;
    std::string domain_patterns_path;
    std::string answer_prompt_path;
    std::string extraction_prompt_path;
    std::string stub_rules_path;

    std::string host = "127.0.0.1";
    int port = 8080;
    /// Environment variable holding the shared API key; unset or empty
    /// variable means the service accepts every request.
    std::string api_key_env;

    /// Throws ConfigError for out-of-range values.
    void validate() const;
};

/// Reads a JSON config; missing keys keep their defaults. Throws ConfigError.
EngineConfig parse_config(const nlohmann::json& j);
EngineConfig load_config(const std::string& path);

/// SCHOLAR_STORE, SCHOLAR_HOST, SCHOLAR_PORT and SCHOLAR_WORKERS override the
/// file. Secrets are never stored in the config, only env variable names.
void apply_env_overrides(EngineConfig& config);

nlohmann::json to_json(const EngineConfig& config);

}  // namespace scholar
