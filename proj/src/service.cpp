#include "scholar/service.hpp"

#include "scholar/api_json.hpp"
#include "scholar/text.hpp"

#include "httplib.h"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

namespace scholar::service {

using nlohmann::json;

std::string question_ref(std::string_view question) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text::normalize_whitespace(question)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("q_{:016x}", h);
}

FeedbackStore::FeedbackStore(db::Database& db) : db_(db) { db::ensure_schema(db_); }

std::int64_t FeedbackStore::add(const FeedbackRecord& r) {
    auto in_range = [](int v) { return v >= 0 && v <= 5; };
    if (!in_range(r.content_score) || !in_range(r.citation_score)) {
        throw PreconditionError("content_score and citation_score must be integers in [0, 5]");
    }
    if (r.subject_ref.empty()) throw PreconditionError("feedback needs a qid or question");
    (void)pipeline_from_string(r.pipeline);
    auto s = db_.prepare(
        "INSERT INTO feedback(subject_ref, pipeline, content_score, citation_score, notes, rater_id) "
        "VALUES (?1, ?2, ?3, ?4, ?5, ?6) RETURNING id");
    s.bind(1, r.subject_ref)
        .bind(2, r.pipeline)
        .bind(3, std::int64_t{r.content_score})
        .bind(4, std::int64_t{r.citation_score})
        .bind(5, r.notes)
        .bind(6, r.rater_id);
    if (!s.step()) throw StoreError("feedback insert returned no id");
    auto id = s.column_int(0);
    s.reset();
    return id;
}

std::vector<FeedbackRecord> FeedbackStore::all() {
    std::vector<FeedbackRecord> out;
    auto s = db_.prepare(
        "SELECT id, subject_ref, pipeline, content_score, citation_score, notes, rater_id, created_at "
        "FROM feedback ORDER BY id");
    while (s.step()) {
        out.push_back({s.column_int(0), s.column_text(1), s.column_text(2), static_cast<int>(s.column_int(3)),
                       static_cast<int>(s.column_int(4)), s.column_text(5), s.column_text(6), s.column_text(7)});
    }
    return out;
}

std::map<std::string, FeedbackMeans> FeedbackStore::summary() {
    std::map<std::string, FeedbackMeans> out;
    auto s = db_.prepare(
        "SELECT pipeline, COUNT(*), AVG(content_score), AVG(citation_score), AVG(content_score + citation_score) "
        "FROM feedback GROUP BY pipeline ORDER BY pipeline");
    while (s.step()) {
        out[s.column_text(0)] = {static_cast<std::size_t>(s.column_int(1)), s.column_double(2), s.column_double(3),
                                 s.column_double(4)};
    }
    return out;
}

std::string_view to_string(JobState s) {
    switch (s) {
        case JobState::running:
            return "running";
        case JobState::succeeded:
            return "succeeded";
        case JobState::failed:
            return "failed";
    }
    return "unknown";
}

JobManager::~JobManager() {
    // jthreads join here; running builds finish before the engine goes away.
    std::vector<std::jthread> threads;
    {
        std::lock_guard lock(mutex_);
        threads.swap(threads_);
    }
}

std::string JobManager::submit(const std::string& kind, std::set<std::string> stores, Work work) {
    std::lock_guard lock(mutex_);
    for (const auto& s : stores) {
        if (busy_.contains(s)) throw ConflictError("a build touching the " + s + " store is already running");
    }
    std::string id = "job-" + std::to_string(next_id_++);
    Job job;
    job.status.id = id;
    job.status.kind = kind;
    job.status.phase = "starting";
    job.stores = stores;
    busy_.insert(stores.begin(), stores.end());
    jobs_.emplace(id, std::move(job));

    threads_.emplace_back([this, id, work = std::move(work)] {
        auto progress = [this, &id](const std::string& phase, std::size_t done, std::size_t total) {
            std::lock_guard lock(mutex_);
            auto& st = jobs_.at(id).status;
            st.phase = phase;
            st.done = done;
            st.total = total;
        };
        json result;
        std::string error;
        bool ok = true;
        try {
            result = work(progress);
        } catch (const std::exception& e) {
            ok = false;
            error = e.what();
            spdlog::error("job {} failed: {}", id, error);
        }
        std::lock_guard lock(mutex_);
        auto& job = jobs_.at(id);
        job.status.state = ok ? JobState::succeeded : JobState::failed;
        job.status.phase = ok ? "done" : "failed";
        job.status.result = std::move(result);
        job.status.error = std::move(error);
        for (const auto& s : job.stores) busy_.erase(s);
        changed_.notify_all();
    });
    return id;
}

std::optional<JobStatus> JobManager::get(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second.status;
}

JobStatus JobManager::wait(const std::string& id) {
    std::unique_lock lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("unknown job " + id);
    changed_.wait(lock, [&] { return jobs_.at(id).status.state != JobState::running; });
    return jobs_.at(id).status;
}

namespace {

const std::set<std::string> kAllStores = {"corpus", "vectors", "tuples", "canonical"};

void reply(httplib::Response& res, int status, json body) {
    res.status = status;
    res.set_content(api::versioned(std::move(body)).dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                 json extra = json::object()) {
    json err = {{"code", code}, {"message", message}};
    err.update(extra);
    reply(res, status, {{"error", err}});
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json j;
    try {
        j = json::parse(req.body);
    } catch (const json::exception& e) {
        throw PreconditionError(std::string("request body is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw PreconditionError("request body must be a JSON object");
    return j;
}

std::string string_field(const json& j, const char* key, bool required) {
    if (!j.contains(key) || j.at(key).is_null()) {
        if (required) throw PreconditionError(std::string("missing field '") + key + "'");
        return {};
    }
    if (!j.at(key).is_string()) throw PreconditionError(std::string("field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

std::int64_t int_field(const json& j, const char* key, std::int64_t lo, std::int64_t hi) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw PreconditionError(std::string("field '") + key + "' must be an integer");
    auto n = v.get<std::int64_t>();
    if (n < lo || n > hi) {
        throw PreconditionError(fmt::format("field '{}' must lie in [{}, {}]", key, lo, hi));
    }
    return n;
}

template <class F>
httplib::Server::Handler guarded(F&& handler) {
    return [handler = std::forward<F>(handler)](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const EmptyQueryError& e) {
            reply_error(res, 400, "empty_query", e.what());
        } catch (const PreconditionError& e) {
            reply_error(res, 400, "invalid_request", e.what());
        } catch (const ConfigError& e) {
            reply_error(res, 400, "invalid_request", e.what());
        } catch (const NotFoundError& e) {
            reply_error(res, 404, "not_found", e.what());
        } catch (const EmptyIndexError& e) {
            reply_error(res, 409, "stores_not_built", e.what());
        } catch (const ConflictError& e) {
            reply_error(res, 409, "build_in_progress", e.what());
        } catch (const nlohmann::json::exception& e) {
            reply_error(res, 400, "invalid_request", e.what());
        } catch (const ProviderError& e) {
            reply_error(res, 502, "provider_failure", e.what(),
                        {{"attempts", e.attempts()}, {"retryable", e.retryable()}, {"tag", e.tag()}});
        } catch (const std::exception& e) {
            spdlog::error("{} {} failed: {}", req.method, req.path, e.what());
            reply_error(res, 500, "internal_error", e.what());
        }
    };
}

json job_json(const JobStatus& s) {
    return {{"job_id", s.id},
            {"kind", s.kind},
            {"state", to_string(s.state)},
            {"phase", s.phase},
            {"done", s.done},
            {"total", s.total},
            {"result", s.result},
            {"error", s.error}};
}

json means_json(const FeedbackMeans& m) {
    return {{"count", m.count}, {"content_mean", m.content}, {"citation_mean", m.citation}, {"total_mean", m.total}};
}

}  // namespace

Service::Service(Engine& engine)
    : engine_(engine), feedback_db_(engine.config().store_path), feedback_(feedback_db_) {}

Service::~Service() { stop(); }

void Service::mount(httplib::Server& server) {
    const std::string key_env = engine_.config().api_key_env;
    server.set_pre_routing_handler([key_env](const httplib::Request& req, httplib::Response& res) {
        if (key_env.empty()) return httplib::Server::HandlerResponse::Unhandled;
        const char* expected = std::getenv(key_env.c_str());
        if (!expected || !*expected) return httplib::Server::HandlerResponse::Unhandled;
        auto auth = req.get_header_value("Authorization");
        auto key = req.get_header_value("X-API-Key");
        if (auth == std::string("Bearer ") + expected || key == expected) {
            return httplib::Server::HandlerResponse::Unhandled;
        }
        reply_error(res, 401, "unauthorized", "missing or wrong API key");
        return httplib::Server::HandlerResponse::Handled;
    });

    server.Post("/query", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        auto question = string_field(body, "question", true);
        if (text::trim(question).empty()) throw PreconditionError("question is empty");
        auto pipeline = pipeline_from_string(string_field(body, "pipeline", true));
        QueryOptions options;
        if (body.contains("k")) {
            if (pipeline != Pipeline::vector) throw PreconditionError("k applies to the vector pipeline only");
            options.k = static_cast<std::size_t>(int_field(body, "k", 1, 64));
        }
        if (body.contains("max_tuples")) {
            if (pipeline != Pipeline::graph) throw PreconditionError("max_tuples applies to the graph pipeline only");
            options.max_tuples = static_cast<std::size_t>(int_field(body, "max_tuples", 1, 2000));
        }
        if (auto model = string_field(body, "model_id", false); !model.empty()) options.generate_model = model;

        auto outcome = engine_.query(pipeline, question, options);
        auto out = api::to_json(outcome);
        if (outcome.answer.failed) {
            out["error"] = {{"code", "provider_failure"},
                            {"message", outcome.diagnostics.empty() ? "generation failed" : outcome.diagnostics.back()},
                            {"tag", outcome.answer.error_tag}};
            reply(res, 502, std::move(out));
            return;
        }
        reply(res, 200, std::move(out));
    }));

    server.Get(R"(/evidence/([A-Za-z0-9_]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, api::to_json(engine_.evidence(req.matches[1].str())));
    }));

    server.Post("/feedback", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        FeedbackRecord r;
        r.subject_ref = string_field(body, "qid", false);
        if (r.subject_ref.empty()) {
            auto question = string_field(body, "question", false);
            if (!question.empty()) r.subject_ref = question_ref(question);
        }
        r.pipeline = string_field(body, "pipeline", true);
        for (const char* key : {"content_score", "citation_score"}) {
            if (!body.contains(key)) throw PreconditionError(std::string("missing field '") + key + "'");
        }
        r.content_score = static_cast<int>(int_field(body, "content_score", 0, 5));
        r.citation_score = static_cast<int>(int_field(body, "citation_score", 0, 5));
        r.notes = string_field(body, "notes", false);
        r.rater_id = string_field(body, "rater_id", false);
        auto id = feedback_.add(r);
        reply(res, 201, {{"id", id}, {"subject_ref", r.subject_ref}, {"total", r.total()}});
    }));

    server.Get("/feedback/summary", guarded([this](const httplib::Request&, httplib::Response& res) {
        json pipelines = json::object();
        FeedbackMeans overall;
        double content = 0, citation = 0, total = 0;
        for (const auto& [name, m] : feedback_.summary()) {
            pipelines[name] = means_json(m);
            overall.count += m.count;
            content += m.content * static_cast<double>(m.count);
            citation += m.citation * static_cast<double>(m.count);
            total += m.total * static_cast<double>(m.count);
        }
        if (overall.count > 0) {
            auto n = static_cast<double>(overall.count);
            overall.content = content / n;
            overall.citation = citation / n;
            overall.total = total / n;
        }
        reply(res, 200, {{"pipelines", pipelines}, {"overall", means_json(overall)}});
    }));

    server.Post("/ingest", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        std::vector<corpus::Document> docs;
        std::vector<std::string> keywords;
        if (body.contains("documents")) {
            if (!body.at("documents").is_array()) throw PreconditionError("'documents' must be an array");
            for (const auto& d : body.at("documents")) {
                try {
                    docs.push_back(corpus::parse_document(d.dump()));
                } catch (const json::exception& e) {
                    throw PreconditionError(std::string("malformed document: ") + e.what());
                }
            }
        } else {
            auto path = string_field(body, "corpus_path", true);
            docs = corpus::load_corpus(path);
        }
        if (body.contains("keywords")) {
            keywords = body.at("keywords").get<std::vector<std::string>>();
        } else if (auto path = string_field(body, "keywords_path", false); !path.empty()) {
            keywords = corpus::load_keywords(path);
        }
        auto id = jobs_.submit("ingest", kAllStores,
                               [this, docs = std::move(docs), keywords = std::move(keywords)](const PhaseProgress& p) {
                                   return api::to_json(engine_.ingest(docs, keywords, p));
                               });
        reply(res, 202, {{"job_id", id}, {"kind", "ingest"}});
    }));

    server.Post("/index-vectors", guarded([this](const httplib::Request&, httplib::Response& res) {
        auto id = jobs_.submit("index-vectors", {"vectors"}, [this](const PhaseProgress& p) {
            return json{{"indexed", engine_.index_vectors(p)}};
        });
        reply(res, 202, {{"job_id", id}, {"kind", "index-vectors"}});
    }));

    server.Post("/build-kg", guarded([this](const httplib::Request&, httplib::Response& res) {
        auto id = jobs_.submit("build-kg", {"tuples", "canonical"},
                               [this](const PhaseProgress& p) { return api::to_json(engine_.build_kg(p)); });
        reply(res, 202, {{"job_id", id}, {"kind", "build-kg"}});
    }));

    server.Post("/canonicalize", guarded([this](const httplib::Request&, httplib::Response& res) {
        auto id = jobs_.submit("canonicalize", {"canonical"},
                               [this](const PhaseProgress& p) { return api::to_json(engine_.canonicalize(p)); });
        reply(res, 202, {{"job_id", id}, {"kind", "canonicalize"}});
    }));

    server.Get(R"(/jobs/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto status = jobs_.get(req.matches[1].str());
        if (!status) throw NotFoundError("unknown job " + req.matches[1].str());
        reply(res, 200, job_json(*status));
    }));

    server.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) {
        auto stats = engine_.stats(0);
        reply(res, 200,
              {{"status", stats.status()},
               {"documents", stats.documents},
               {"vectors", stats.vectors},
               {"tuples", stats.tuples},
               {"canonical_entities", stats.canonicals}});
    }));

    server.Get("/stats", guarded([this](const httplib::Request& req, httplib::Response& res) {
        std::size_t top = 10;
        if (req.has_param("top")) {
            try {
                top = static_cast<std::size_t>(std::stoul(req.get_param_value("top")));
            } catch (const std::exception&) {
                throw PreconditionError("'top' must be a non-negative integer");
            }
        }
        reply(res, 200, api::to_json(engine_.stats(top)));
    }));
}

void Service::listen(const std::string& host, int port) {
    server_ = std::make_unique<httplib::Server>();
    mount(*server_);
    spdlog::info("serving on http://{}:{}", host, port);
    if (!server_->listen(host, port)) throw ConfigError(fmt::format("cannot listen on {}:{}", host, port));
}

int Service::start_background(const std::string& host) {
    server_ = std::make_unique<httplib::Server>();
    mount(*server_);
    int port = server_->bind_to_any_port(host);
    if (port <= 0) throw ConfigError("cannot bind an ephemeral port on " + host);
    thread_ = std::jthread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void Service::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace scholar::service
