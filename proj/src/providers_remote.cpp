// HTTP clients for OpenAI-compatible provider APIs:
//   POST <endpoint>/embeddings        {"model", "input": [...]}
//       -> {"data": [{"index", "embedding": [...]}]}
//   POST <endpoint>/chat/completions  {"model", "messages": [{"role": "user", "content"}]}
//       -> {"choices": [{"message": {"content", "refusal"?}}], "usage": {...}}
//   POST <endpoint>/rerank            {"model", "query", "documents": [...]}
//       -> {"results": [{"index", "relevance_score"}]}
#include "scholar/providers.hpp"

#include "scholar/text.hpp"

#include "httplib.h"
#include "json.hpp"

#include <spdlog/spdlog.h>

#include <condition_variable>
#include <cstdlib>
#include <map>
#include <mutex>

namespace scholar::providers {

using nlohmann::json;

namespace {

/// Caps concurrent requests per endpoint across all clients in the process.
class EndpointLimiter {
public:
    static EndpointLimiter& for_endpoint(const std::string& endpoint, int cap) {
        static std::mutex registry_mutex;
        static std::map<std::string, std::unique_ptr<EndpointLimiter>> registry;
        std::lock_guard lock(registry_mutex);
        auto& slot = registry[endpoint];
        if (!slot) slot = std::make_unique<EndpointLimiter>(cap);
        return *slot;
    }

    explicit EndpointLimiter(int cap) : available_(cap) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

struct Slot {
    explicit Slot(EndpointLimiter& l) : limiter(l) { limiter.acquire(); }
    ~Slot() { limiter.release(); }
    EndpointLimiter& limiter;
};

class HttpJsonClient {
public:
    explicit HttpJsonClient(const ProviderConfig& cfg) : cfg_(cfg) {
        const auto& url = cfg.endpoint;
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw ConfigError("endpoint must be a URL or \"local\": " + url);
        auto path_start = url.find('/', scheme_end + 3);
        origin_ = url.substr(0, path_start);
        prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        if (!cfg.api_key_env.empty()) {
            if (const char* key = std::getenv(cfg.api_key_env.c_str())) api_key_ = key;
        }
    }

    json post(const std::string& route, const json& body) const {
        Slot slot(EndpointLimiter::for_endpoint(cfg_.endpoint, cfg_.max_concurrent));
        httplib::Client client(origin_);
        auto secs = static_cast<time_t>(cfg_.timeout_seconds);
        auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto res = client.Post(prefix_ + route, headers, body.dump(), "application/json");
        if (!res) {
            auto err = res.error();
            bool timeout = err == httplib::Error::Read || err == httplib::Error::Write ||
                           err == httplib::Error::ConnectionTimeout;
            throw ProviderError(cfg_.model_id + ": " + httplib::to_string(err), true, 1,
                                timeout ? "timeout" : "http");
        }
        if (res->status == 429 || res->status >= 500) {
            throw ProviderError(cfg_.model_id + ": HTTP " + std::to_string(res->status) + " " + res->body, true,
                                1, "http");
        }
        if (res->status >= 400) {
            throw ProviderError(cfg_.model_id + ": HTTP " + std::to_string(res->status) + " " + res->body, false,
                                1, "http");
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw ProviderError(cfg_.model_id + ": malformed JSON response: " + e.what(), true, 1, "protocol");
        }
    }

private:
    ProviderConfig cfg_;
    std::string origin_;
    std::string prefix_;
    std::string api_key_;
};

class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(ProviderConfig cfg, RetryPolicy retry) : cfg_(std::move(cfg)), retry_(retry), http_(cfg_) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<std::size_t> positions;
        json inputs = json::array();
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (text::trim(texts[i]).empty()) {
                out[i].model_id = cfg_.model_id;
                out[i].zero = true;
                spdlog::warn("embedding input {} is empty; returning zero vector", i);
                continue;
            }
            positions.push_back(i);
            inputs.push_back(texts[i]);
        }
        if (positions.empty()) return out;

        json response = with_retry(retry_, [&] {
            return http_.post("/embeddings", {{"model", cfg_.model_id}, {"input", inputs}});
        });
        try {
            const auto& data = response.at("data");
            if (data.size() != positions.size()) {
                throw ProviderError(cfg_.model_id + ": embeddings count mismatch", false, 1, "protocol");
            }
            std::size_t dim = 0;
            for (std::size_t n = 0; n < data.size(); ++n) {
                const auto& item = data[n];
                std::size_t slot = item.contains("index") ? item.at("index").get<std::size_t>() : n;
                if (slot >= positions.size()) {
                    throw ProviderError(cfg_.model_id + ": embedding index out of range", false, 1, "protocol");
                }
                auto& v = out[positions[slot]];
                v.values = item.at("embedding").get<std::vector<float>>();
                v.model_id = cfg_.model_id;
                if (dim == 0) dim = v.values.size();
                if (v.values.size() != dim || dim == 0) {
                    throw ProviderError(cfg_.model_id + ": inconsistent embedding dimensions", false, 1, "protocol");
                }
                normalize(v);
            }
            for (auto& v : out) {
                if (v.values.empty()) v.values.assign(dim, 0.0f);
            }
        } catch (const json::exception& e) {
            throw ProviderError(cfg_.model_id + ": unexpected embeddings payload: " + e.what(), false, 1,
                                "protocol");
        }
        return out;
    }

    const ProviderConfig& config() const override { return cfg_; }

private:
    ProviderConfig cfg_;
    RetryPolicy retry_;
    HttpJsonClient http_;
};

class RemoteGenerator final : public Generator {
public:
    RemoteGenerator(ProviderConfig cfg, RetryPolicy retry) : cfg_(std::move(cfg)), retry_(retry), http_(cfg_) {}

    GenerationResult generate(const std::string& prompt) override {
        auto start = std::chrono::steady_clock::now();
        json body = {{"model", cfg_.model_id},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
        json response = with_retry(retry_, [&] { return http_.post("/chat/completions", body); });

        GenerationResult r;
        try {
            const auto& message = response.at("choices").at(0).at("message");
            if (message.contains("refusal") && message.at("refusal").is_string()) {
                throw ProviderError(message.at("refusal").get<std::string>(), false, 1, "refusal");
            }
            r.text = message.at("content").is_string() ? message.at("content").get<std::string>() : "";
            if (response.contains("usage")) {
                const auto& usage = response.at("usage");
                r.prompt_tokens = usage.value("prompt_tokens", std::int64_t{0});
                r.completion_tokens = usage.value("completion_tokens", std::int64_t{0});
            } else {
                r.prompt_tokens = static_cast<std::int64_t>(text::whitespace_token_count(prompt));
                r.completion_tokens = static_cast<std::int64_t>(text::whitespace_token_count(r.text));
            }
        } catch (const json::exception& e) {
            throw ProviderError(cfg_.model_id + ": unexpected chat payload: " + e.what(), false, 1, "protocol");
        }
        r.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return r;
    }

    const ProviderConfig& config() const override { return cfg_; }

private:
    ProviderConfig cfg_;
    RetryPolicy retry_;
    HttpJsonClient http_;
};

class RemoteCrossScorer final : public CrossScorer {
public:
    RemoteCrossScorer(ProviderConfig cfg, RetryPolicy retry) : cfg_(std::move(cfg)), retry_(retry), http_(cfg_) {}

    std::vector<double> score(const std::string& query, const std::vector<std::string>& passages) override {
        json body = {{"model", cfg_.model_id}, {"query", query}, {"documents", passages}};
        json response = with_retry(retry_, [&] { return http_.post("/rerank", body); });
        std::vector<double> scores(passages.size(), 0.0);
        std::vector<bool> seen(passages.size(), false);
        try {
            for (const auto& item : response.at("results")) {
                auto index = item.at("index").get<std::size_t>();
                if (index >= passages.size()) {
                    throw ProviderError(cfg_.model_id + ": rerank index out of range", false, 1, "protocol");
                }
                scores[index] = item.at("relevance_score").get<double>();
                seen[index] = true;
            }
        } catch (const json::exception& e) {
            throw ProviderError(cfg_.model_id + ": unexpected rerank payload: " + e.what(), false, 1, "protocol");
        }
        for (bool s : seen) {
            if (!s) throw ProviderError(cfg_.model_id + ": rerank response misses passages", false, 1, "protocol");
        }
        return scores;
    }

    const ProviderConfig& config() const override { return cfg_; }

private:
    ProviderConfig cfg_;
    RetryPolicy retry_;
    HttpJsonClient http_;
};

}  // namespace

std::unique_ptr<Embedder> make_remote_embedder(const ProviderConfig& cfg, RetryPolicy retry) {
    cfg.validate();
    return std::make_unique<RemoteEmbedder>(cfg, retry);
}

std::unique_ptr<Generator> make_remote_generator(const ProviderConfig& cfg, RetryPolicy retry) {
    cfg.validate();
    return std::make_unique<RemoteGenerator>(cfg, retry);
}

std::unique_ptr<CrossScorer> make_remote_cross_scorer(const ProviderConfig& cfg, RetryPolicy retry) {
    cfg.validate();
    return std::make_unique<RemoteCrossScorer>(cfg, retry);
}

}  // namespace scholar::providers
