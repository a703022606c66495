#pragma once

#include "scholar/engine.hpp"
#include "scholar/errors.hpp"

#include "json.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace scholar::service {

/// Expert score for one answer: up to 5 points for content, 5 for citations.
struct FeedbackRecord {
    std::int64_t id = 0;
    std::string subject_ref;  // qid, or "q_<hash>" for an ad-hoc question
    std::string pipeline;
    int content_score = 0;
    int citation_score = 0;
    std::string notes;
    std::string rater_id;
    std::string created_at;

    int total() const { return content_score + citation_score; }
};

/// Stable reference for an ad-hoc question: "q_" + 16 hex digits (FNV-1a 64).
std::string question_ref(std::string_view question);

struct FeedbackMeans {
    std::size_t count = 0;
    double content = 0.0;
    double citation = 0.0;
    double total = 0.0;
};

class FeedbackStore {
public:
    explicit FeedbackStore(db::Database& db);

    /// Validates scores (integers 0-5) and the pipeline name; returns the id.
    /// Throws PreconditionError.
    std::int64_t add(const FeedbackRecord& record);
    std::vector<FeedbackRecord> all();
    /// Means per pipeline.
    std::map<std::string, FeedbackMeans> summary();

private:
    db::Database& db_;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

enum class JobState { running, succeeded, failed };
std::string_view to_string(JobState s);

struct JobStatus {
    std::string id;
    std::string kind;
    JobState state = JobState::running;
    std::string phase;
    std::size_t done = 0;
    std::size_t total = 0;
    nlohmann::json result;
    std::string error;
};

/// Background builds. Each job claims a set of stores; a job whose stores
/// overlap a running job is refused with ConflictError.
class JobManager {
public:
    using Work = std::function<nlohmann::json(const PhaseProgress&)>;

    JobManager() = default;
    ~JobManager();
    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    std::string submit(const std::string& kind, std::set<std::string> stores, Work work);
    std::optional<JobStatus> get(const std::string& id);
    /// Blocks until the job leaves the running state.
    JobStatus wait(const std::string& id);

private:
    struct Job {
        JobStatus status;
        std::set<std::string> stores;
    };

    std::mutex mutex_;
    std::condition_variable changed_;
    std::map<std::string, Job> jobs_;
    std::set<std::string> busy_;
    std::uint64_t next_id_ = 1;
    std::vector<std::jthread> threads_;
};

/// HTTP+JSON front end over an Engine. Routes are documented in docs/api.md.
class Service {
public:
    explicit Service(Engine& engine);
    ~Service();

    /// Registers every route on `server`.
    void mount(httplib::Server& server);

    /// Blocks serving on host:port until stop() is called.
    void listen(const std::string& host, int port);
    /// Binds an ephemeral port and serves on a background thread; returns the port.
    int start_background(const std::string& host = "127.0.0.1");
    void stop();

    JobManager& jobs() { return jobs_; }

private:
    Engine& engine_;
    db::Database feedback_db_;
    FeedbackStore feedback_;
    JobManager jobs_;
    std::unique_ptr<httplib::Server> server_;
    std::jthread thread_;
};

}  // namespace scholar::service
