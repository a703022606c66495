#include "fixtures.hpp"

#include "scholar/service.hpp"

#include "httplib.h"
#include "json.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <future>
#include <thread>

namespace scholar::service {
namespace {

using nlohmann::json;

json post(httplib::Client& c, const std::string& path, const json& body, int expected_status) {
    auto res = c.Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expected_status) << path << ": " << res->body;
    return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expected_status) {
    auto res = c.Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expected_status) << path << ": " << res->body;
    return json::parse(res->body);
}

json wait_job(httplib::Client& c, const std::string& id) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
    for (;;) {
        auto j = get(c, "/jobs/" + id, 200);
        if (j.value("state", "") != "running" || std::chrono::steady_clock::now() > deadline) return j;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        port_ = service_.start_background();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(60);
    }

    /// Ingests and builds every store through the HTTP job routes.
    void build_over_http() {
        planted_ = testing::make_planted_corpus(3, 2, 1, 31);
        json docs = json::array();
        for (const auto& d : planted_.docs) docs.push_back(json::parse(corpus::serialize_document(d)));
        for (const auto& [path, body] : std::vector<std::pair<std::string, json>>{{"/ingest", {{"documents", docs}}},
                                                                               {"/index-vectors", json::object()},
                                                                               {"/build-kg", json::object()},
                                                                               {"/canonicalize", json::object()}}) {
            auto accepted = post(*client_, path, body, 202);
            auto done = wait_job(*client_, accepted.at("job_id").get<std::string>());
            ASSERT_EQ(done.at("state"), "succeeded") << path << ": " << done.dump();
        }
    }

    testing::TempStore store_;
    Engine engine_{testing::local_config(store_.path())};
    Service service_{engine_};
    int port_ = 0;
    std::unique_ptr<httplib::Client> client_;
    testing::PlantedCorpus planted_;
};

TEST_F(ServiceTest, HealthOnEmptyStore) {
    auto h = get(*client_, "/health", 200);
    EXPECT_EQ(h.at("status"), "empty");
    EXPECT_EQ(h.at("documents"), 0);
}

TEST_F(ServiceTest, QueryBeforeBuildIsConflict) {
    auto err = post(*client_, "/query", {{"question", "melting temperature of PHB"}, {"pipeline", "vector"}}, 409);
    EXPECT_EQ(err.at("error").at("code"), "stores_not_built");
}

TEST_F(ServiceTest, MalformedQueriesAreBadRequests) {
    post(*client_, "/query", {{"pipeline", "vector"}}, 400);
    post(*client_, "/query", {{"question", "  "}, {"pipeline", "vector"}}, 400);
    post(*client_, "/query", {{"question", "x"}, {"pipeline", "hybrid"}}, 400);
    post(*client_, "/query", {{"question", "x"}, {"pipeline", "graph"}, {"k", 4}}, 400);
    post(*client_, "/query", {{"question", "x"}, {"pipeline", "vector"}, {"k", 0}}, 400);
    auto res = client_->Post("/query", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, BuildQueryEvidenceAndStats) {
    build_over_http();
    const auto& q = planted_.questions.at(0);
    for (const char* pipeline : {"vector", "graph"}) {
        auto out = post(*client_, "/query", {{"question", q.question}, {"pipeline", pipeline}}, 200);
        EXPECT_EQ(out.at("pipeline"), pipeline);
        EXPECT_FALSE(out.at("answer").at("abstained").get<bool>());
        EXPECT_FALSE(out.at("evidence").empty());
        EXPECT_EQ(out.at("schema_version").is_null(), false);
        auto pids = out.at("retrieved_pids").get<std::vector<std::string>>();
        EXPECT_NE(std::find(pids.begin(), pids.end(), q.expected_pid), pids.end()) << pipeline;
        if (std::string(pipeline) == "graph") EXPECT_TRUE(out.contains("subgraph"));

        auto ref = out.at("evidence").at(0).at("ref").get<std::string>();
        auto detail = get(*client_, "/evidence/" + ref, 200);
        EXPECT_EQ(detail.at("ref"), ref);
        EXPECT_FALSE(detail.at("paragraphs").empty());
    }
    get(*client_, "/evidence/t_00ff", 404);

    auto unmatched = post(*client_, "/query",
                          {{"question", planted_.unanswerable.at(0).question}, {"pipeline", "graph"}}, 200);
    EXPECT_TRUE(unmatched.at("answer").at("abstained").get<bool>());

    auto stats = get(*client_, "/stats?top=2", 200);
    auto direct = engine_.stats(2);
    EXPECT_EQ(stats.at("status"), "ready");
    EXPECT_EQ(stats.at("tuples"), direct.tuples);
    EXPECT_EQ(stats.at("vectors"), direct.vectors);
    EXPECT_LE(stats.at("top_clusters").size(), 2u);
    get(*client_, "/stats?top=x", 400);
    EXPECT_EQ(get(*client_, "/health", 200).at("status"), "ready");
}

TEST_F(ServiceTest, FeedbackScoresAndSummary) {
    auto created = post(*client_, "/feedback",
                        {{"question", "What is the Tm of PHB?"}, {"pipeline", "graph"}, {"content_score", 5},
                         {"citation_score", 4}, {"rater_id", "r1"}},
                        201);
    EXPECT_EQ(created.at("total"), 9);
    EXPECT_EQ(created.at("subject_ref"), question_ref("What is the Tm of PHB?"));
    post(*client_, "/feedback", {{"qid", "q2"}, {"pipeline", "graph"}, {"content_score", 5}, {"citation_score", 5}},
         201);
    post(*client_, "/feedback", {{"qid", "q3"}, {"pipeline", "graph"}, {"content_score", 4}, {"citation_score", 4}},
         201);
    post(*client_, "/feedback", {{"qid", "q4"}, {"pipeline", "graph"}, {"content_score", 6}, {"citation_score", 4}},
         400);
    post(*client_, "/feedback", {{"qid", "q4"}, {"pipeline", "graph"}, {"content_score", 4}}, 400);
    post(*client_, "/feedback", {{"qid", "q4"}, {"pipeline", "other"}, {"content_score", 4}, {"citation_score", 4}},
         400);

    auto summary = get(*client_, "/feedback/summary", 200);
    EXPECT_EQ(summary.at("pipelines").at("graph").at("count"), 3);
    EXPECT_DOUBLE_EQ(summary.at("pipelines").at("graph").at("total_mean").get<double>(), 9.0);
    EXPECT_DOUBLE_EQ(summary.at("overall").at("total_mean").get<double>(), 9.0);
    EXPECT_EQ(engine_.stats().feedback, 3u);
}

TEST_F(ServiceTest, OverlappingBuildIsRefused) {
    std::promise<void> release;
    auto gate = release.get_future().share();
    auto id = service_.jobs().submit("build-kg", {"tuples", "canonical"}, [gate](const PhaseProgress&) {
        gate.wait();
        return json::object();
    });
    auto err = post(*client_, "/build-kg", json::object(), 409);
    EXPECT_EQ(err.at("error").at("code"), "build_in_progress");
    post(*client_, "/canonicalize", json::object(), 409);
    auto running = get(*client_, "/jobs/" + id, 200);
    EXPECT_EQ(running.at("state"), "running");
    release.set_value();
    EXPECT_EQ(service_.jobs().wait(id).state, JobState::succeeded);
    get(*client_, "/jobs/nope", 404);
}

TEST(JobManagerTest, FailureIsRecorded) {
    JobManager jobs;
    auto id = jobs.submit("x", {"a"}, [](const PhaseProgress& p) -> json {
        p("phase one", 1, 2);
        throw std::runtime_error("broken build");
    });
    auto s = jobs.wait(id);
    EXPECT_EQ(s.state, JobState::failed);
    EXPECT_NE(s.error.find("broken build"), std::string::npos);
    EXPECT_FALSE(jobs.get("missing").has_value());
}

TEST(QuestionRefTest, StableHexDigest) {
    auto r = question_ref("What is the Tm of PHB?");
    EXPECT_EQ(r.size(), 18u);
    EXPECT_EQ(r.substr(0, 2), "q_");
    EXPECT_EQ(r, question_ref("What is the Tm of PHB?"));
    EXPECT_NE(r, question_ref("What is the Tg of PHB?"));
    // FNV-1a 64 of the empty string is the offset basis.
    EXPECT_EQ(question_ref(""), "q_cbf29ce484222325");
}

TEST(ServiceAuthTest, KeyRequiredWhenConfigured) {
    ::setenv("SCHOLAR_UNIT_TEST_KEY", "s3cret", 1);
    testing::TempStore store;
    auto cfg = testing::local_config(store.path());
    cfg.api_key_env = "SCHOLAR_UNIT_TEST_KEY";
    Engine engine(cfg);
    Service service(engine);
    httplib::Client c("127.0.0.1", service.start_background());
    auto denied = c.Get("/health");
    ASSERT_TRUE(denied);
    EXPECT_EQ(denied->status, 401);
    EXPECT_EQ(c.Get("/health", {{"X-API-Key", "wrong"}})->status, 401);
    EXPECT_EQ(c.Get("/health", {{"X-API-Key", "s3cret"}})->status, 200);
    EXPECT_EQ(c.Get("/health", {{"Authorization", "Bearer s3cret"}})->status, 200);
    service.stop();
    ::unsetenv("SCHOLAR_UNIT_TEST_KEY");
}

}  // namespace
}  // namespace scholar::service
