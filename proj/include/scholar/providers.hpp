#pragma once

#include "scholar/errors.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace scholar::providers {

enum class Role { embed, generate, cross_score };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct ProviderConfig {
    Role role = Role::embed;
    /// Base URL of an OpenAI-compatible API, or "local" for the offline fallback.
    std::string endpoint = "local";
    std::string model_id = "local-hash";
    double price_per_1k_prompt = 0.0;
    double price_per_1k_completion = 0.0;
    double timeout_seconds = 60.0;
    /// Name of the environment variable holding the API key (never the key).
    std::string api_key_env;
    /// Concurrent in-flight requests allowed per endpoint.
    int max_concurrent = 8;
    /// Dimension of the local hashed embedder. Remote dimensions are whatever
    /// the provider returns.
    std::size_t local_dim = 256;

    bool is_local() const { return endpoint == "local"; }
    /// Throws ConfigError for negative prices, non-positive timeout or cap.
    void validate() const;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

struct EmbeddingVector {
    std::vector<float> values;
    std::string model_id;
    /// Set for empty input text; cosine against a zero vector is 0.
    bool zero = false;

    std::size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

/// Scales to unit L2 norm in place; a zero vector stays zero and is flagged.
void normalize(EmbeddingVector& v);

/// Cosine similarity of two embeddings, 0 when either is a zero vector.
/// Throws PreconditionError on dimension mismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Little-endian blob: uint32 dim followed by dim float32 values.
std::vector<std::uint8_t> encode_vector(const std::vector<float>& values);
std::vector<float> decode_vector(const std::vector<std::uint8_t>& blob);

struct GenerationResult {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double latency_seconds = 0.0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    virtual const ProviderConfig& config() const = 0;
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual GenerationResult generate(const std::string& prompt) = 0;
    virtual const ProviderConfig& config() const = 0;
};

class CrossScorer {
public:
    virtual ~CrossScorer() = default;
    /// One raw score per passage, order-aligned.
    virtual std::vector<double> score(const std::string& query, const std::vector<std::string>& passages) = 0;
    virtual const ProviderConfig& config() const = 0;
};

/// Hashed bag-of-tokens embedder: lowercase, split on non-alphanumerics,
/// hash each token into one of `local_dim` buckets with a fixed seed,
/// accumulate counts, L2-normalize.
class LocalEmbedder final : public Embedder {
public:
    static constexpr std::uint64_t kDefaultSeed = 0x5eed5c401a4ULL;

    explicit LocalEmbedder(ProviderConfig cfg, std::uint64_t seed = kDefaultSeed);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    const ProviderConfig& config() const override { return cfg_; }

    EmbeddingVector embed_one(std::string_view text) const;
    std::size_t bucket(std::string_view token) const;

private:
    ProviderConfig cfg_;
    std::uint64_t seed_;
};

/// Deterministic template engine for offline runs. It answers only from
/// markers in the prompt:
///   ANSWER:<value>          always answered
///   ANSWER[<key>]:<value>   answered only when <key> occurs as a word in the
///                           prompt outside the numbered evidence lines
/// A marker on an evidence line "[n] ..." is answered as "<value> [n]".
/// With no usable marker the reply is the abstention sentence.
class LocalGenerator final : public Generator {
public:
    explicit LocalGenerator(ProviderConfig cfg, std::string abstention = "I do not know");

    GenerationResult generate(const std::string& prompt) override;
    const ProviderConfig& config() const override { return cfg_; }

private:
    ProviderConfig cfg_;
    std::string abstention_;
};

/// Fraction of distinct query tokens that occur in the passage.
class LocalCrossScorer final : public CrossScorer {
public:
    explicit LocalCrossScorer(ProviderConfig cfg);

    std::vector<double> score(const std::string& query, const std::vector<std::string>& passages) override;
    const ProviderConfig& config() const override { return cfg_; }

private:
    ProviderConfig cfg_;
};

/// Local implementation for endpoint "local", otherwise the HTTP client.
/// Throws ConfigError when the role does not match.
std::unique_ptr<Embedder> make_embedder(const ProviderConfig& cfg, RetryPolicy retry = {});
std::unique_ptr<Generator> make_generator(const ProviderConfig& cfg, RetryPolicy retry = {},
                                          std::string abstention = "I do not know");
std::unique_ptr<CrossScorer> make_cross_scorer(const ProviderConfig& cfg, RetryPolicy retry = {});

std::unique_ptr<Embedder> make_remote_embedder(const ProviderConfig& cfg, RetryPolicy retry);
std::unique_ptr<Generator> make_remote_generator(const ProviderConfig& cfg, RetryPolicy retry);
std::unique_ptr<CrossScorer> make_remote_cross_scorer(const ProviderConfig& cfg, RetryPolicy retry);

// Checked entry points used by the pipelines.

/// One normalized vector per text, same order. Throws PreconditionError for an
/// empty batch and ConfigError for a non-embed provider.
std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts, Embedder& embedder);

GenerationResult generate(const std::string& prompt, Generator& generator);

std::vector<double> cross_score(const std::string& query, const std::vector<std::string>& passages,
                                CrossScorer& scorer);

/// prompt_tokens/1000 * prompt price + completion_tokens/1000 * completion price.
double cost_of(const GenerationResult& result, const ProviderConfig& cfg);

/// Runs `call`, retrying retryable ProviderErrors with exponential backoff.
/// The rethrown error carries the number of attempts made.
template <class F>
auto with_retry(const RetryPolicy& policy, F&& call) -> decltype(call()) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return call();
        } catch (const ProviderError& e) {
            if (!e.retryable() || attempt >= policy.max_attempts) {
                throw ProviderError(e.what(), e.retryable(), attempt, e.tag());
            }
        }
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<std::int64_t>(static_cast<double>(backoff.count()) * policy.multiplier));
    }
}

}  // namespace scholar::providers
