// Command-line front end. Every HTTP endpoint has a subcommand that runs the
// same engine call against the local store.

#include "scholar/api_json.hpp"
#include "scholar/config.hpp"
#include "scholar/engine.hpp"
#include "scholar/errors.hpp"
#include "scholar/eval.hpp"
#include "scholar/service.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <spdlog/spdlog.h>
#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

using nlohmann::json;
using namespace scholar;

enum ExitCode : int {
    kOk = 0,
    kError = 1,
    kNoQuestions = 3,
    kStoresNotBuilt = 4,
    kProviderFailure = 5,
};

struct GlobalOptions {
    std::string config_path;
    std::string store;
    bool verbose = false;
};

EngineConfig make_config(const GlobalOptions& g) {
    EngineConfig cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    apply_env_overrides(cfg);
    if (!g.store.empty()) cfg.store_path = g.store;
    cfg.validate();
    return cfg;
}

/// Per-invocation parameter overrides; unset values keep the config file's.
struct ParamOverrides {
    std::optional<double> threshold;
    std::optional<std::size_t> coarse_k;
    std::optional<std::string> extract_model;
    std::optional<double> alpha;
    std::optional<double> tau;
    std::optional<double> lambda;
    std::optional<double> canon_threshold;

    void apply(EngineConfig& cfg) const {
        if (threshold) cfg.canonicalize.distance_threshold = *threshold;
        if (coarse_k) cfg.canonicalize.coarse_k = *coarse_k;
        if (extract_model) cfg.extract.model_id = *extract_model;
        if (alpha) cfg.graph.alpha = *alpha;
        if (tau) cfg.graph.tau = *tau;
        if (lambda) cfg.graph.lambda = *lambda;
        if (canon_threshold) cfg.graph.canonical_sim_threshold = *canon_threshold;
    }
};

void add_canonicalize_options(CLI::App* cmd, ParamOverrides& o) {
    cmd->add_option("--threshold", o.threshold, "Cosine distance merge threshold")->check(CLI::Range(0.0, 2.0));
    cmd->add_option("--coarse-k", o.coarse_k, "Coarse k-means clusters")->check(CLI::PositiveNumber);
}

void add_retrieval_options(CLI::App* cmd, ParamOverrides& o) {
    cmd->add_option("--alpha", o.alpha, "Canonical weight in the hybrid score (graph)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--tau", o.tau, "Hybrid score cut-off (graph)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--lambda", o.lambda, "Rerank weight in the final score (graph)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--canon-threshold", o.canon_threshold, "Keyword-to-canonical similarity threshold (graph)")
        ->check(CLI::Range(-1.0, 1.0));
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

void print_progress(const std::string& phase, std::size_t done, std::size_t total) {
    if (total == 0) return;
    if (done == total || done % 50 == 0) spdlog::info("{}: {}/{}", phase, done, total);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Literature question answering over a vector index and a knowledge graph"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("-c,--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("-s,--store", g.store, "SQLite store file (overrides config)");
    app.add_flag("-v,--verbose", g.verbose, "Debug logging");

    auto* ingest = app.add_subcommand("ingest", "Load a JSONL corpus into the paragraph store");
    std::string corpus_path, keywords_path;
    ingest->add_option("corpus", corpus_path, "Corpus file, one JSON document per line")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("-k,--keywords", keywords_path, "Keyword filter file (one per line)")
        ->check(CLI::ExistingFile);

    auto* index_vectors = app.add_subcommand("index-vectors", "Embed every chunk into the vector index");
    ParamOverrides overrides;
    auto* build_kg = app.add_subcommand("build-kg", "Extract knowledge graph tuples from every paragraph");
    build_kg->add_option("--model", overrides.extract_model, "Extraction model override");
    auto* canonicalize = app.add_subcommand("canonicalize", "Cluster entity surface forms into canonical nodes");
    add_canonicalize_options(canonicalize, overrides);
    auto* build_all = app.add_subcommand("build", "index-vectors, build-kg and canonicalize in sequence");
    build_all->add_option("--model", overrides.extract_model, "Extraction model override");
    add_canonicalize_options(build_all, overrides);

    auto* query = app.add_subcommand("query", "Answer a question with one pipeline");
    std::string question, pipeline_name = "graph", model_id;
    std::size_t k = 0, max_tuples = 0;
    query->add_option("question", question, "Question text")->required();
    query->add_option("-p,--pipeline", pipeline_name, "vector or graph")
        ->check(CLI::IsMember({"vector", "graph"}));
    query->add_option("--k", k, "Chunks to retrieve (vector, 1-64)")->check(CLI::Range(1, 64));
    query->add_option("--max-tuples", max_tuples, "Tuples to keep (graph, 1-2000)")->check(CLI::Range(1, 2000));
    query->add_option("--model", model_id, "Generation model override");
    add_retrieval_options(query, overrides);

    auto* evidence = app.add_subcommand("evidence", "Show the stored source of an evidence reference");
    std::string ref;
    evidence->add_option("ref", ref, "Reference from a query response")->required();

    auto* eval = app.add_subcommand("eval", "Run an evaluation question set through one pipeline");
    std::string questions_path, report_path = "report.json";
    std::size_t eval_k = 8, eval_max_tuples = 300, recall_k = 8;
    eval->add_option("-p,--pipeline", pipeline_name, "vector or graph")
        ->check(CLI::IsMember({"vector", "graph"}));
    eval->add_option("-q,--questions", questions_path, "JSONL questions")->required()->check(CLI::ExistingFile);
    eval->add_option("--k", eval_k, "Chunks per question (vector)")->check(CLI::Range(1, 64));
    eval->add_option("--max-tuples", eval_max_tuples, "Tuples per question (graph)")->check(CLI::Range(1, 2000));
    eval->add_option("--recall-k", recall_k, "Recall cut-off in retrieved contexts (0 = all)");
    eval->add_option("-o,--out", report_path, "Report file (JSON)");
    add_retrieval_options(eval, overrides);

    auto* accuracy = app.add_subcommand("accuracy", "Record an expert 0/1 verdict in a report");
    std::string qid;
    int verdict = 0;
    accuracy->add_option("report", report_path, "Report file")->required()->check(CLI::ExistingFile);
    accuracy->add_option("qid", qid, "Question id")->required();
    accuracy->add_option("verdict", verdict, "0 or 1")->required()->check(CLI::Range(0, 1));

    auto* table = app.add_subcommand("table", "Print reports side by side");
    std::vector<std::string> report_paths;
    table->add_option("reports", report_paths, "Report files")->required()->check(CLI::ExistingFile);

    auto* feedback = app.add_subcommand("feedback", "Store an expert score for an answer");
    int content_score = 0, citation_score = 0;
    std::string notes, rater;
    feedback->add_option("--qid", qid, "Question id");
    feedback->add_option("--question", question, "Ad-hoc question text (hashed)");
    feedback->add_option("-p,--pipeline", pipeline_name, "vector or graph")
        ->check(CLI::IsMember({"vector", "graph"}));
    feedback->add_option("--content", content_score, "Content score 0-5")->required()->check(CLI::Range(0, 5));
    feedback->add_option("--citation", citation_score, "Citation score 0-5")->required()->check(CLI::Range(0, 5));
    feedback->add_option("--notes", notes, "Free text");
    feedback->add_option("--rater", rater, "Rater id");

    auto* feedback_summary = app.add_subcommand("feedback-summary", "Mean expert scores per pipeline");
    auto* stats = app.add_subcommand("stats", "Store counts and the largest canonical clusters");
    std::size_t top = 10;
    stats->add_option("--top", top, "Clusters to list");
    auto* health = app.add_subcommand("health", "Store status: empty, partial or ready");

    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    std::string host;
    int port = 0;
    serve->add_option("--host", host, "Bind address (overrides config)");
    serve->add_option("--port", port, "Port (overrides config)")->check(CLI::Range(1, 65535));

    auto* show_config = app.add_subcommand("config", "Print the effective configuration");

    CLI11_PARSE(app, argc, argv);
    // stdout carries JSON results only.
    spdlog::set_default_logger(spdlog::stderr_color_mt("scholar"));
    spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        auto cfg = make_config(g);
        overrides.apply(cfg);
        cfg.validate();
        if (*show_config) {
            print(to_json(cfg));
            return kOk;
        }
        if (*accuracy) {
            auto report = eval::load_report(report_path);
            const auto& rec = report.record_accuracy(qid, verdict);
            eval::save_report(report, report_path);
            spdlog::info("{}: accuracy {}", rec.qid, verdict);
            std::cout << eval::format_table({report});
            return kOk;
        }
        if (*table) {
            std::vector<eval::EvalReport> reports;
            for (const auto& p : report_paths) reports.push_back(eval::load_report(p));
            std::cout << eval::format_table(reports);
            return kOk;
        }

        Engine engine(cfg);
        if (*ingest) {
            print(api::to_json(engine.ingest_file(corpus_path, keywords_path, print_progress)));
        } else if (*index_vectors) {
            print({{"indexed", engine.index_vectors(print_progress)}});
        } else if (*build_kg) {
            print(api::to_json(engine.build_kg(print_progress)));
        } else if (*canonicalize) {
            print(api::to_json(engine.canonicalize(print_progress)));
        } else if (*build_all) {
            json out;
            out["indexed"] = engine.index_vectors(print_progress);
            out["build_kg"] = api::to_json(engine.build_kg(print_progress));
            out["canonicalize"] = api::to_json(engine.canonicalize(print_progress));
            print(out);
        } else if (*query) {
            QueryOptions options;
            if (k > 0) options.k = k;
            if (max_tuples > 0) options.max_tuples = max_tuples;
            if (!model_id.empty()) options.generate_model = model_id;
            auto outcome = engine.query(pipeline_from_string(pipeline_name), question, options);
            print(api::versioned(api::to_json(outcome)));
            if (outcome.answer.failed) return kProviderFailure;
        } else if (*evidence) {
            print(api::versioned(api::to_json(engine.evidence(ref))));
        } else if (*eval) {
            auto questions = eval::load_questions(questions_path);
            auto pipeline = pipeline_from_string(pipeline_name);
            QueryOptions options;
            eval::ReportConfig rc;
            rc.pipeline = pipeline_name;
            rc.k = recall_k;
            if (pipeline == Pipeline::vector) {
                options.k = eval_k;
                rc.model = cfg.generate.model_id;
                rc.context_limit = std::to_string(eval_k) + " chunks";
            } else {
                options.max_tuples = eval_max_tuples;
                rc.model = cfg.generate.model_id;
                rc.context_limit = std::to_string(eval_max_tuples) + " tuples";
            }
            auto report = eval::run_eval(questions, engine.eval_runner(pipeline, options), rc, cfg.workers);
            eval::save_report(report, report_path);
            std::cout << eval::format_table({report});
            spdlog::info("report written to {}", report_path);
            if (questions.empty()) {
                spdlog::warn("question file has no questions");
                return kNoQuestions;
            }
        } else if (*feedback) {
            db::Database db(cfg.store_path);
            service::FeedbackStore store(db);
            service::FeedbackRecord r;
            r.subject_ref = !qid.empty() ? qid : (question.empty() ? "" : service::question_ref(question));
            r.pipeline = pipeline_name;
            r.content_score = content_score;
            r.citation_score = citation_score;
            r.notes = notes;
            r.rater_id = rater;
            auto id = store.add(r);
            print({{"id", id}, {"subject_ref", r.subject_ref}, {"total", r.total()}});
        } else if (*feedback_summary) {
            db::Database db(cfg.store_path);
            service::FeedbackStore store(db);
            json out = json::object();
            for (const auto& [name, m] : store.summary()) {
                out[name] = {{"count", m.count},
                             {"content_mean", m.content},
                             {"citation_mean", m.citation},
                             {"total_mean", m.total}};
            }
            print(api::versioned({{"pipelines", out}}));
        } else if (*stats) {
            print(api::versioned(api::to_json(engine.stats(top))));
        } else if (*health) {
            print(api::versioned({{"status", engine.stats(0).status()}}));
        } else if (*serve) {
            service::Service svc(engine);
            svc.listen(host.empty() ? cfg.host : host, port == 0 ? cfg.port : port);
        }
    } catch (const EmptyIndexError& e) {
        spdlog::error("{}", e.what());
        return kStoresNotBuilt;
    } catch (const ProviderError& e) {
        spdlog::error("provider failure after {} attempt(s): {}", e.attempts(), e.what());
        return kProviderFailure;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kError;
    }
    return kOk;
}
