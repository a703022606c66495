#pragma once

#include "json.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scholar::eval {

/// 1 iff expected_pid is among the first min(k, size) retrieved pids.
/// Throws PreconditionError for k < 1.
int recall_at_k(const std::string& expected_pid, const std::vector<std::string>& retrieved_pids, std::size_t k);

/// 1 iff expected_doi is among the dois of the first k retrieved items.
int recall_pid_at_k(const std::string& expected_doi, const std::vector<std::string>& retrieved_dois, std::size_t k);

/// Arithmetic mean; MetricError for an empty list.
double mean_metric(const std::vector<int>& values);
double mean_metric(const std::vector<double>& values);

/// Number of leading pids that belong to the first `k` contexts.
std::size_t pids_in_top_contexts(const std::vector<std::size_t>& context_starts, std::size_t pid_count,
                                 std::size_t k);

struct EvalQuestion {
    std::string qid;
    std::string question;
    std::string expected_pid;  // empty for a question the corpus cannot answer
    std::string expected_doi;

    bool answerable() const { return !expected_pid.empty(); }
};

/// Line-delimited JSON objects with qid, question, expected_pid, expected_doi.
/// Throws ConfigError with the line number on malformed input or repeated qids.
std::vector<EvalQuestion> parse_questions(std::string_view content);
std::vector<EvalQuestion> load_questions(const std::string& path);

/// What one pipeline run produced for a question.
struct PipelineRun {
    std::vector<std::string> retrieved_pids;  // ranked contexts, deduplicated
    std::vector<std::string> retrieved_dois;  // aligned with retrieved_pids
    /// Position in retrieved_pids where each ranked context starts, for
    /// contexts that span several paragraphs (vector chunks). Empty means
    /// every pid is its own context.
    std::vector<std::size_t> context_starts;
    std::string answer;
    std::vector<int> citations;
    bool abstained = false;
    double latency_seconds = 0.0;
    double cost_dollars = 0.0;
};

using PipelineFn = std::function<PipelineRun(const EvalQuestion&)>;

struct EvalRecord {
    std::string qid;
    std::string pipeline;
    std::vector<std::string> retrieved_pids;
    std::vector<std::string> retrieved_dois;
    std::vector<std::size_t> context_starts;
    int recall_at_k = 0;
    int recall_pid_at_k = 0;
    std::optional<int> accuracy;
    double latency_seconds = 0.0;
    double cost_dollars = 0.0;
    bool answerable = true;
    bool abstained = false;
    std::size_t citation_count = 0;
    std::string answer;
    bool failed = false;
    std::string error;
};

struct AccuracyAudit {
    std::string qid;
    int verdict = 0;
    std::optional<int> previous;
};

struct ReportConfig {
    std::string pipeline;
    std::string model;
    std::string context_limit;  // e.g. "8 paragraphs" or "300 tuples"
    /// Recall cut-off in ranked contexts; 0 uses the whole list.
    std::size_t k = 0;
};

struct Aggregate {
    std::size_t questions = 0;
    std::size_t answerable = 0;
    std::size_t failed = 0;
    std::optional<double> recall;
    std::optional<double> recall_pid;
    std::optional<double> accuracy;
    std::optional<double> mean_latency;
    std::optional<double> mean_cost;
};

class EvalReport {
public:
    EvalReport() = default;
    EvalReport(ReportConfig config, std::vector<EvalRecord> records);

    const ReportConfig& config() const { return config_; }
    const std::vector<EvalRecord>& records() const { return records_; }
    const std::vector<AccuracyAudit>& audit() const { return audit_; }

    /// Stores an expert verdict (0 or 1); re-recording overwrites and keeps an
    /// audit row. Throws NotFoundError for an unknown qid, PreconditionError
    /// for other verdicts.
    const EvalRecord& record_accuracy(const std::string& qid, int verdict);

    /// Means over non-failed records. Recall uses answerable questions only;
    /// accuracy uses records with a verdict.
    Aggregate aggregate() const;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);

private:
    ReportConfig config_;
    std::vector<EvalRecord> records_;
    std::vector<AccuracyAudit> audit_;
};

/// Table with the columns Models | Context limit | Recall | Recall PID |
/// Accuracy | Avg. response time (s) | Avg. total cost ($), one row per report.
std::string format_table(const std::vector<EvalReport>& reports);

/// Runs every question through `run` (up to `workers` at a time) and scores
/// the results. A question whose run throws is recorded as failed.
EvalReport run_eval(const std::vector<EvalQuestion>& questions, const PipelineFn& run, const ReportConfig& config,
                    int workers = 1);

void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

}  // namespace scholar::eval
