#include "scholar/eval.hpp"

#include "scholar/errors.hpp"
#include "scholar/text.hpp"

#include <fmt/format.h>
#include "json.hpp"
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

namespace scholar::eval {

using nlohmann::json;

int recall_at_k(const std::string& expected_pid, const std::vector<std::string>& retrieved_pids, std::size_t k) {
    if (k < 1) throw PreconditionError("k must be at least 1");
    auto end = retrieved_pids.begin() + static_cast<std::ptrdiff_t>(std::min(k, retrieved_pids.size()));
    return std::find(retrieved_pids.begin(), end, expected_pid) != end ? 1 : 0;
}

std::size_t pids_in_top_contexts(const std::vector<std::size_t>& context_starts, std::size_t pid_count,
                                 std::size_t k) {
    if (context_starts.empty()) return std::min(k, pid_count);
    if (k >= context_starts.size()) return pid_count;
    return std::min(context_starts[k], pid_count);
}

int recall_pid_at_k(const std::string& expected_doi, const std::vector<std::string>& retrieved_dois, std::size_t k) {
    return recall_at_k(expected_doi, retrieved_dois, k);
}

double mean_metric(const std::vector<int>& values) {
    if (values.empty()) throw MetricError("mean of an empty metric list is undefined");
    return static_cast<double>(std::accumulate(values.begin(), values.end(), 0LL)) /
           static_cast<double>(values.size());
}

double mean_metric(const std::vector<double>& values) {
    if (values.empty()) throw MetricError("mean of an empty metric list is undefined");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::vector<EvalQuestion> parse_questions(std::string_view content) {
    std::vector<EvalQuestion> out;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    for (const auto& raw : text::lines(content)) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty()) continue;
        auto where = [&] { return "questions line " + std::to_string(line_no) + ": "; };
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError(where() + e.what());
        }
        if (!j.is_object()) throw ConfigError(where() + "expected an object");
        EvalQuestion q;
        try {
            q.qid = j.at("qid").get<std::string>();
            q.question = j.at("question").get<std::string>();
            q.expected_pid = j.value("expected_pid", "");
            q.expected_doi = j.value("expected_doi", "");
        } catch (const json::exception& e) {
            throw ConfigError(where() + e.what());
        }
        if (q.qid.empty() || text::trim(q.question).empty()) throw ConfigError(where() + "qid and question required");
        if (!seen.insert(q.qid).second) throw ConfigError(where() + "repeated qid " + q.qid);
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<EvalQuestion> load_questions(const std::string& path) { return parse_questions(text::read_file(path)); }

EvalReport::EvalReport(ReportConfig config, std::vector<EvalRecord> records)
    : config_(std::move(config)), records_(std::move(records)) {}

const EvalRecord& EvalReport::record_accuracy(const std::string& qid, int verdict) {
    if (verdict != 0 && verdict != 1) throw PreconditionError("accuracy verdict must be 0 or 1");
    auto it = std::find_if(records_.begin(), records_.end(), [&](const EvalRecord& r) { return r.qid == qid; });
    if (it == records_.end()) throw NotFoundError("unknown qid: " + qid);
    audit_.push_back({qid, verdict, it->accuracy});
    it->accuracy = verdict;
    return *it;
}

Aggregate EvalReport::aggregate() const {
    Aggregate a;
    a.questions = records_.size();
    std::vector<int> recall, recall_pid, accuracy;
    std::vector<double> latency, cost;
    for (const auto& r : records_) {
        if (r.answerable) ++a.answerable;
        if (r.failed) {
            ++a.failed;
            continue;
        }
        if (r.answerable) {
            recall.push_back(r.recall_at_k);
            recall_pid.push_back(r.recall_pid_at_k);
        }
        if (r.accuracy) accuracy.push_back(*r.accuracy);
        latency.push_back(r.latency_seconds);
        cost.push_back(r.cost_dollars);
    }
    if (!recall.empty()) a.recall = mean_metric(recall);
    if (!recall_pid.empty()) a.recall_pid = mean_metric(recall_pid);
    if (!accuracy.empty()) a.accuracy = mean_metric(accuracy);
    if (!latency.empty()) a.mean_latency = mean_metric(latency);
    if (!cost.empty()) a.mean_cost = mean_metric(cost);
    return a;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json EvalReport::to_json() const {
    json records = json::array();
    for (const auto& r : records_) {
        records.push_back({{"qid", r.qid},
                           {"pipeline", r.pipeline},
                           {"retrieved_pids", r.retrieved_pids},
                           {"retrieved_dois", r.retrieved_dois},
                           {"context_starts", r.context_starts},
                           {"recall_at_k", r.recall_at_k},
                           {"recall_pid_at_k", r.recall_pid_at_k},
                           {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)},
                           {"latency_seconds", r.latency_seconds},
                           {"cost_dollars", r.cost_dollars},
                           {"answerable", r.answerable},
                           {"abstained", r.abstained},
                           {"citation_count", r.citation_count},
                           {"answer", r.answer},
                           {"failed", r.failed},
                           {"error", r.error}});
    }
    json audit = json::array();
    for (const auto& a : audit_) {
        audit.push_back({{"qid", a.qid},
                         {"verdict", a.verdict},
                         {"previous", a.previous ? json(*a.previous) : json(nullptr)}});
    }
    auto agg = aggregate();
    return {{"config",
             {{"pipeline", config_.pipeline},
              {"model", config_.model},
              {"context_limit", config_.context_limit},
              {"k", config_.k}}},
            {"aggregate",
             {{"questions", agg.questions},
              {"answerable", agg.answerable},
              {"failed", agg.failed},
              {"recall", optional_json(agg.recall)},
              {"recall_pid", optional_json(agg.recall_pid)},
              {"accuracy", optional_json(agg.accuracy)},
              {"mean_latency_seconds", optional_json(agg.mean_latency)},
              {"mean_cost_dollars", optional_json(agg.mean_cost)}}},
            {"records", records},
            {"accuracy_audit", audit}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport report;
    const auto& c = j.at("config");
    report.config_ = {c.at("pipeline").get<std::string>(), c.at("model").get<std::string>(),
                      c.at("context_limit").get<std::string>(), c.value("k", std::size_t{0})};
    for (const auto& r : j.at("records")) {
        EvalRecord rec;
        rec.qid = r.at("qid").get<std::string>();
        rec.pipeline = r.at("pipeline").get<std::string>();
        rec.retrieved_pids = r.at("retrieved_pids").get<std::vector<std::string>>();
        rec.retrieved_dois = r.at("retrieved_dois").get<std::vector<std::string>>();
        rec.context_starts = r.value("context_starts", std::vector<std::size_t>{});
        rec.recall_at_k = r.at("recall_at_k").get<int>();
        rec.recall_pid_at_k = r.at("recall_pid_at_k").get<int>();
        if (!r.at("accuracy").is_null()) rec.accuracy = r.at("accuracy").get<int>();
        rec.latency_seconds = r.at("latency_seconds").get<double>();
        rec.cost_dollars = r.at("cost_dollars").get<double>();
        rec.answerable = r.value("answerable", true);
        rec.abstained = r.value("abstained", false);
        rec.citation_count = r.value("citation_count", std::size_t{0});
        rec.answer = r.value("answer", "");
        rec.failed = r.value("failed", false);
        rec.error = r.value("error", "");
        report.records_.push_back(std::move(rec));
    }
    if (j.contains("accuracy_audit")) {
        for (const auto& a : j.at("accuracy_audit")) {
            AccuracyAudit row{a.at("qid").get<std::string>(), a.at("verdict").get<int>(), std::nullopt};
            if (!a.at("previous").is_null()) row.previous = a.at("previous").get<int>();
            report.audit_.push_back(std::move(row));
        }
    }
    return report;
}

std::string format_table(const std::vector<EvalReport>& reports) {
    const std::vector<std::string> header = {"Models",   "Context limit",          "Recall",
                                             "Recall PID", "Accuracy", "Avg. response time (s)",
                                             "Avg. total cost ($)"};
    auto num = [](const std::optional<double>& v, int digits) {
        return v ? fmt::format("{:.{}f}", *v, digits) : std::string("-");
    };
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports) {
        auto a = r.aggregate();
        rows.push_back({r.config().pipeline + " (" + r.config().model + ")", r.config().context_limit,
                        num(a.recall, 3), num(a.recall_pid, 3), num(a.accuracy, 3), num(a.mean_latency, 2),
                        num(a.mean_cost, 4)});
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
        std::string s = "|";
        for (std::size_t c = 0; c < cells.size(); ++c) s += fmt::format(" {:<{}} |", cells[c], width[c]);
        return s + "\n";
    };
    std::string out = line(header);
    std::string rule = "|";
    for (auto w : width) rule += std::string(w + 2, '-') + "|";
    out += rule + "\n";
    for (const auto& row : rows) out += line(row);
    return out;
}

EvalReport run_eval(const std::vector<EvalQuestion>& questions, const PipelineFn& run, const ReportConfig& config,
                    int workers) {
    std::vector<EvalRecord> records(questions.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (auto i = next.fetch_add(1); i < questions.size(); i = next.fetch_add(1)) {
            const auto& q = questions[i];
            auto& rec = records[i];
            rec.qid = q.qid;
            rec.pipeline = config.pipeline;
            rec.answerable = q.answerable();
            try {
                auto result = run(q);
                rec.retrieved_pids = std::move(result.retrieved_pids);
                rec.retrieved_dois = std::move(result.retrieved_dois);
                rec.context_starts = std::move(result.context_starts);
                rec.answer = std::move(result.answer);
                rec.citation_count = result.citations.size();
                rec.abstained = result.abstained;
                rec.latency_seconds = result.latency_seconds;
                rec.cost_dollars = result.cost_dollars;
                if (q.answerable()) {
                    std::size_t n = rec.retrieved_pids.size();
                    std::size_t k = config.k == 0 ? n : pids_in_top_contexts(rec.context_starts, n, config.k);
                    k = std::max<std::size_t>(1, k);
                    rec.recall_at_k = recall_at_k(q.expected_pid, rec.retrieved_pids, k);
                    rec.recall_pid_at_k = recall_pid_at_k(q.expected_doi, rec.retrieved_dois, k);
                }
            } catch (const std::exception& e) {
                spdlog::warn("question {} failed: {}", q.qid, e.what());
                rec.failed = true;
                rec.error = e.what();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int w = 1; w < std::max(1, workers); ++w) pool.emplace_back(work);
        work();
    }
    return EvalReport(config, std::move(records));
}

void save_report(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write report " + path);
    out << report.to_json().dump(2) << "\n";
}

EvalReport load_report(const std::string& path) {
    try {
        return EvalReport::from_json(json::parse(text::read_file(path)));
    } catch (const json::exception& e) {
        throw ConfigError("malformed report " + path + ": " + e.what());
    }
}

}  // namespace scholar::eval
