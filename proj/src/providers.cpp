#include "scholar/providers.hpp"

#include "scholar/text.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <regex>
#include <set>
#include <unordered_set>

namespace scholar::providers {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::embed: return "embed";
        case Role::generate: return "generate";
        case Role::cross_score: return "cross_score";
    }
    return "embed";
}

Role role_from_string(std::string_view s) {
    if (s == "embed") return Role::embed;
    if (s == "generate") return Role::generate;
    if (s == "cross_score") return Role::cross_score;
    throw ConfigError("unknown provider role: " + std::string(s));
}

void ProviderConfig::validate() const {
    if (price_per_1k_prompt < 0 || price_per_1k_completion < 0) {
        throw ConfigError("provider " + model_id + ": prices must be >= 0");
    }
    if (!(timeout_seconds > 0)) throw ConfigError("provider " + model_id + ": timeout must be > 0");
    if (max_concurrent < 1) throw ConfigError("provider " + model_id + ": max_concurrent must be >= 1");
    if (is_local() && local_dim == 0) throw ConfigError("local embedder dimension must be > 0");
}

void normalize(EmbeddingVector& v) {
    double sq = 0.0;
    for (float x : v.values) {
        if (!std::isfinite(x)) throw InvariantError("embedding contains a non-finite value");
        sq += static_cast<double>(x) * x;
    }
    if (sq == 0.0) {
        v.zero = true;
        return;
    }
    double inv = 1.0 / std::sqrt(sq);
    for (auto& x : v.values) x = static_cast<float>(x * inv);
    v.zero = false;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw PreconditionError("cosine of vectors with dims " + std::to_string(a.dim()) + " and " +
                                std::to_string(b.dim()));
    }
    if (a.zero || b.zero) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += static_cast<double>(a.values[i]) * b.values[i];
        na += static_cast<double>(a.values[i]) * a.values[i];
        nb += static_cast<double>(b.values[i]) * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    double c = dot / std::sqrt(na * nb);
    return std::clamp(c, -1.0, 1.0);
}

std::vector<std::uint8_t> encode_vector(const std::vector<float>& values) {
    std::vector<std::uint8_t> out(4 + values.size() * 4);
    auto put32 = [&](std::size_t offset, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out[offset + i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
    };
    put32(0, static_cast<std::uint32_t>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &values[i], 4);
        put32(4 + i * 4, bits);
    }
    return out;
}

std::vector<float> decode_vector(const std::vector<std::uint8_t>& blob) {
    if (blob.size() < 4) throw StoreError("vector blob shorter than its header");
    auto get32 = [&](std::size_t offset) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(blob[offset + i]) << (8 * i);
        return v;
    };
    std::uint32_t dim = get32(0);
    if (blob.size() != 4 + static_cast<std::size_t>(dim) * 4) {
        throw StoreError("vector blob size does not match its dim header");
    }
    std::vector<float> values(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
        std::uint32_t bits = get32(4 + static_cast<std::size_t>(i) * 4);
        std::memcpy(&values[i], &bits, 4);
    }
    return values;
}

namespace {

// FNV-1a, 64-bit, started from a seed-mixed offset basis.
std::uint64_t seeded_hash(std::string_view s, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    // final avalanche (splitmix64 finalizer) so nearby strings spread across buckets
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

void require_role(const ProviderConfig& cfg, Role role) {
    if (cfg.role != role) {
        throw ConfigError("provider " + cfg.model_id + " has role " + std::string(to_string(cfg.role)) +
                          ", expected " + std::string(to_string(role)));
    }
}

}  // namespace

LocalEmbedder::LocalEmbedder(ProviderConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
    require_role(cfg_, Role::embed);
    cfg_.validate();
}

std::size_t LocalEmbedder::bucket(std::string_view token) const {
    return static_cast<std::size_t>(seeded_hash(token, seed_) % cfg_.local_dim);
}

EmbeddingVector LocalEmbedder::embed_one(std::string_view text) const {
    EmbeddingVector v;
    v.model_id = cfg_.model_id;
    v.values.assign(cfg_.local_dim, 0.0f);
    for (const auto& token : text::word_tokens(text)) v.values[bucket(token)] += 1.0f;
    normalize(v);
    return v;
}

std::vector<EmbeddingVector> LocalEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(embed_one(t));
        if (out.back().zero) spdlog::warn("embedding input has no tokens; returning zero vector");
    }
    return out;
}

LocalGenerator::LocalGenerator(ProviderConfig cfg, std::string abstention)
    : cfg_(std::move(cfg)), abstention_(std::move(abstention)) {
    require_role(cfg_, Role::generate);
    cfg_.validate();
}

GenerationResult LocalGenerator::generate(const std::string& prompt) {
    auto start = std::chrono::steady_clock::now();
    static const std::regex kEvidenceLine(R"(^\[(\d+)\])");
    static const std::regex kMarker(R"(ANSWER(?:\[([^\]]+)\])?:(\S+))");

    auto all_lines = text::lines(prompt);
    std::string outside_evidence;
    for (const auto& line : all_lines) {
        if (!std::regex_search(line, kEvidenceLine)) outside_evidence += line + "\n";
    }

    std::vector<std::string> answers;
    std::set<std::string> seen;
    for (const auto& line : all_lines) {
        std::smatch idx;
        std::string citation;
        if (std::regex_search(line, idx, kEvidenceLine)) citation = " [" + idx[1].str() + "]";
        for (std::sregex_iterator it(line.begin(), line.end(), kMarker), end; it != end; ++it) {
            std::string key = (*it)[1].str();
            std::string value = (*it)[2].str();
            while (!value.empty() && (value.back() == '.' || value.back() == ',' || value.back() == ';')) {
                value.pop_back();
            }
            if (value.empty()) continue;
            if (!key.empty() && !text::contains_word(outside_evidence, key)) continue;
            std::string answer = value + citation;
            if (seen.insert(answer).second) answers.push_back(std::move(answer));
        }
    }

    GenerationResult r;
    r.text = answers.empty() ? abstention_ + "." : text::join(answers, "; ");
    r.prompt_tokens = static_cast<std::int64_t>(text::whitespace_token_count(prompt));
    r.completion_tokens = static_cast<std::int64_t>(text::whitespace_token_count(r.text));
    r.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

LocalCrossScorer::LocalCrossScorer(ProviderConfig cfg) : cfg_(std::move(cfg)) {
    require_role(cfg_, Role::cross_score);
    cfg_.validate();
}

std::vector<double> LocalCrossScorer::score(const std::string& query, const std::vector<std::string>& passages) {
    auto q = text::word_tokens(query);
    std::set<std::string> query_tokens(q.begin(), q.end());
    std::vector<double> scores;
    scores.reserve(passages.size());
    for (const auto& p : passages) {
        if (query_tokens.empty()) {
            scores.push_back(0.0);
            continue;
        }
        auto pt = text::word_tokens(p);
        std::unordered_set<std::string> passage_tokens(pt.begin(), pt.end());
        std::size_t hits = 0;
        for (const auto& t : query_tokens) hits += passage_tokens.count(t);
        scores.push_back(static_cast<double>(hits) / static_cast<double>(query_tokens.size()));
    }
    return scores;
}

std::unique_ptr<Embedder> make_embedder(const ProviderConfig& cfg, RetryPolicy retry) {
    require_role(cfg, Role::embed);
    if (cfg.is_local()) return std::make_unique<LocalEmbedder>(cfg);
    return make_remote_embedder(cfg, retry);
}

std::unique_ptr<Generator> make_generator(const ProviderConfig& cfg, RetryPolicy retry, std::string abstention) {
    require_role(cfg, Role::generate);
    if (cfg.is_local()) return std::make_unique<LocalGenerator>(cfg, std::move(abstention));
    return make_remote_generator(cfg, retry);
}

std::unique_ptr<CrossScorer> make_cross_scorer(const ProviderConfig& cfg, RetryPolicy retry) {
    require_role(cfg, Role::cross_score);
    if (cfg.is_local()) return std::make_unique<LocalCrossScorer>(cfg);
    return make_remote_cross_scorer(cfg, retry);
}

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts, Embedder& embedder) {
    require_role(embedder.config(), Role::embed);
    if (texts.empty()) throw PreconditionError("embed_texts needs at least one text");
    auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) {
        throw ProviderError("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                                std::to_string(texts.size()) + " texts",
                            false, 1, "protocol");
    }
    for (auto& v : vectors) normalize(v);
    return vectors;
}

GenerationResult generate(const std::string& prompt, Generator& generator) {
    require_role(generator.config(), Role::generate);
    if (text::trim(prompt).empty()) throw PreconditionError("generate needs a non-empty prompt");
    return generator.generate(prompt);
}

std::vector<double> cross_score(const std::string& query, const std::vector<std::string>& passages,
                                CrossScorer& scorer) {
    require_role(scorer.config(), Role::cross_score);
    if (passages.empty()) throw PreconditionError("cross_score needs at least one passage");
    auto scores = scorer.score(query, passages);
    if (scores.size() != passages.size()) {
        throw ProviderError("cross-scorer returned " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(passages.size()) + " passages",
                            false, 1, "protocol");
    }
    return scores;
}

double cost_of(const GenerationResult& result, const ProviderConfig& cfg) {
    return static_cast<double>(result.prompt_tokens) / 1000.0 * cfg.price_per_1k_prompt +
           static_cast<double>(result.completion_tokens) / 1000.0 * cfg.price_per_1k_completion;
}

}  // namespace scholar::providers
