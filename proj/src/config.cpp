#include "scholar/config.hpp"

#include "scholar/errors.hpp"
#include "scholar/text.hpp"

#include <cstdlib>
#include <filesystem>

namespace scholar {

using nlohmann::json;

namespace {

providers::ProviderConfig provider_from_json(const json& j, providers::ProviderConfig cfg) {
    cfg.endpoint = j.value("endpoint", cfg.endpoint);
    cfg.model_id = j.value("model_id", cfg.model_id);
    cfg.price_per_1k_prompt = j.value("price_per_1k_prompt", cfg.price_per_1k_prompt);
    cfg.price_per_1k_completion = j.value("price_per_1k_completion", cfg.price_per_1k_completion);
    cfg.timeout_seconds = j.value("timeout_seconds", cfg.timeout_seconds);
    cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
    cfg.max_concurrent = j.value("max_concurrent", cfg.max_concurrent);
    cfg.local_dim = j.value("local_dim", cfg.local_dim);
    return cfg;
}

json provider_to_json(const providers::ProviderConfig& cfg) {
    return {{"endpoint", cfg.endpoint},
            {"model_id", cfg.model_id},
            {"price_per_1k_prompt", cfg.price_per_1k_prompt},
            {"price_per_1k_completion", cfg.price_per_1k_completion},
            {"timeout_seconds", cfg.timeout_seconds},
            {"api_key_env", cfg.api_key_env},
            {"max_concurrent", cfg.max_concurrent},
            {"local_dim", cfg.local_dim}};
}

const json& section(const json& j, const char* key) {
    static const json kEmpty = json::object();
    if (!j.contains(key)) return kEmpty;
    const auto& s = j.at(key);
    if (!s.is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
    return s;
}

}  // namespace

void EngineConfig::validate() const {
    if (store_path.empty()) throw ConfigError("store path is empty");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (k < 1 || k > 64) throw ConfigError("k must lie in [1, 64]");
    if (port < 0 || port > 65535) throw ConfigError("port out of range");
    if (retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
    for (const auto* p : {&embed, &entity_embed, &generate, &extract, &cross_score}) p->validate();
    try {
        graph.validate();
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
    }
    if (canonicalize.coarse_k < 1) throw ConfigError("canonicalize.coarse_k must be at least 1");
    if (!(canonicalize.distance_threshold > 0.0 && canonicalize.distance_threshold <= 2.0)) {
        throw ConfigError("canonicalize.distance_threshold must lie in (0, 2]");
    }
    if (chunking.max_tokens < 1) throw ConfigError("chunking.max_tokens must be at least 1");
}

EngineConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    EngineConfig c;
    try {
        c.store_path = j.value("store", c.store_path);
        c.workers = j.value("workers", c.workers);

        const auto& p = section(j, "providers");
        c.embed = provider_from_json(section(p, "embed"), c.embed);
        c.entity_embed = provider_from_json(section(p, "entity_embed"), c.entity_embed);
        c.generate = provider_from_json(section(p, "generate"), c.generate);
        c.extract = provider_from_json(section(p, "extract"), c.extract);
        c.cross_score = provider_from_json(section(p, "cross_score"), c.cross_score);

        const auto& retry = section(j, "retry");
        c.retry.max_attempts = retry.value("max_attempts", c.retry.max_attempts);
        c.retry.initial_backoff =
            std::chrono::milliseconds(retry.value("initial_backoff_ms", c.retry.initial_backoff.count()));
        c.retry.multiplier = retry.value("multiplier", c.retry.multiplier);

        const auto& r = section(j, "retrieval");
        c.k = r.value("k", c.k);
        c.graph.alpha = r.value("alpha", c.graph.alpha);
        c.graph.tau = r.value("tau", c.graph.tau);
        c.graph.lambda = r.value("lambda", c.graph.lambda);
        c.graph.max_tuples = r.value("max_tuples", c.graph.max_tuples);
        c.graph.canonical_sim_threshold = r.value("canonical_sim_threshold", c.graph.canonical_sim_threshold);
        c.graph.rerank_pool_factor = r.value("rerank_pool_factor", c.graph.rerank_pool_factor);

        const auto& cz = section(j, "canonicalize");
        c.canonicalize.coarse_k = cz.value("coarse_k", c.canonicalize.coarse_k);
        c.canonicalize.distance_threshold = cz.value("distance_threshold", c.canonicalize.distance_threshold);
        c.canonicalize.seed = cz.value("seed", c.canonicalize.seed);
        c.canonicalize.batch_size = cz.value("batch_size", c.canonicalize.batch_size);
        c.canonicalize.max_iterations = cz.value("max_iterations", c.canonicalize.max_iterations);
        c.canonicalize.numeric_fraction = cz.value("numeric_fraction", c.canonicalize.numeric_fraction);

        const auto& ctx = section(j, "context");
        c.context.token_budget = ctx.value("token_budget", c.context.token_budget);
        c.context.abstention = ctx.value("abstention", c.context.abstention);

        const auto& ch = section(j, "chunking");
        c.chunking.max_tokens = ch.value("max_tokens", c.chunking.max_tokens);

        const auto& res = section(j, "resources");
        c.stopwords_path = res.value("stopwords", c.stopwords_path);
        c.domain_patterns_path = res.value("domain_patterns", c.domain_patterns_path);
        c.answer_prompt_path = res.value("answer_prompt", c.answer_prompt_path);
        c.extraction_prompt_path = res.value("extraction_prompt", c.extraction_prompt_path);
        c.stub_rules_path = res.value("stub_rules", c.stub_rules_path);

        const auto& svc = section(j, "service");
        c.host = svc.value("host", c.host);
        c.port = svc.value("port", c.port);
        c.api_key_env = svc.value("api_key_env", c.api_key_env);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config value: ") + e.what());
    }
    c.canonicalize.workers = c.workers;
    return c;
}

EngineConfig load_config(const std::string& path) {
    if (!std::filesystem::is_regular_file(path)) throw ConfigError("config file not found: " + path);
    json j;
    try {
        j = json::parse(text::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config " + path + ": " + e.what());
    }
    return parse_config(j);
}

void apply_env_overrides(EngineConfig& config) {
    auto env = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v ? std::string(v) : std::string();
    };
    auto as_int = [](const std::string& v, const char* name) {
        try {
            return std::stoi(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string(name) + " must be an integer");
        }
    };
    if (auto v = env("SCHOLAR_STORE"); !v.empty()) config.store_path = v;
    if (auto v = env("SCHOLAR_HOST"); !v.empty()) config.host = v;
    if (auto v = env("SCHOLAR_PORT"); !v.empty()) config.port = as_int(v, "SCHOLAR_PORT");
    if (auto v = env("SCHOLAR_WORKERS"); !v.empty()) {
        config.workers = as_int(v, "SCHOLAR_WORKERS");
        config.canonicalize.workers = config.workers;
    }
}

json to_json(const EngineConfig& c) {
    return {{"store", c.store_path},
            {"workers", c.workers},
            {"providers",
             {{"embed", provider_to_json(c.embed)},
              {"entity_embed", provider_to_json(c.entity_embed)},
              {"generate", provider_to_json(c.generate)},
              {"extract", provider_to_json(c.extract)},
              {"cross_score", provider_to_json(c.cross_score)}}},
            {"retry",
             {{"max_attempts", c.retry.max_attempts},
              {"initial_backoff_ms", c.retry.initial_backoff.count()},
              {"multiplier", c.retry.multiplier}}},
            {"retrieval",
             {{"k", c.k},
              {"alpha", c.graph.alpha},
              {"tau", c.graph.tau},
              {"lambda", c.graph.lambda},
              {"max_tuples", c.graph.max_tuples},
              {"canonical_sim_threshold", c.graph.canonical_sim_threshold},
              {"rerank_pool_factor", c.graph.rerank_pool_factor}}},
            {"canonicalize",
             {{"coarse_k", c.canonicalize.coarse_k},
              {"distance_threshold", c.canonicalize.distance_threshold},
              {"seed", c.canonicalize.seed},
              {"batch_size", c.canonicalize.batch_size},
              {"max_iterations", c.canonicalize.max_iterations},
              {"numeric_fraction", c.canonicalize.numeric_fraction}}},
            {"context", {{"token_budget", c.context.token_budget}, {"abstention", c.context.abstention}}},
            {"chunking", {{"max_tokens", c.chunking.max_tokens}}},
            {"resources",
             {{"stopwords", c.stopwords_path},
              {"domain_patterns", c.domain_patterns_path},
              {"answer_prompt", c.answer_prompt_path},
              {"extraction_prompt", c.extraction_prompt_path},
              {"stub_rules", c.stub_rules_path}}},
            {"service", {{"host", c.host}, {"port", c.port}, {"api_key_env", c.api_key_env}}}};
}

}  // namespace scholar
