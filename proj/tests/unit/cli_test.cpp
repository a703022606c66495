#include "fixtures.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

namespace scholar {
namespace {

using nlohmann::json;

struct CliResult {
    int exit_code = -1;
    std::string out;
};

class CliTest : public ::testing::Test {
protected:
    CliResult run(const std::string& args) {
        std::string cmd = std::string("'") + SCHOLAR_CLI_PATH + "' -c '" + demo("config.json") + "' -s '" +
                          store_.path() + "' " + args + " 2>/dev/null";
        CliResult r;
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) return r;
        std::array<char, 4096> buf{};
        for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0;) r.out.append(buf.data(), n);
        int status = ::pclose(pipe);
        r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        return r;
    }

    static std::string demo(const std::string& name) { return std::string(SCHOLAR_DEMO_DIR) + "/" + name; }

    std::string tmp(const std::string& name) { return (dir_.path() / name).string(); }

    testing::TempStore store_;
    testing::TempDir dir_;
};

TEST_F(CliTest, QueryBeforeBuildExitsWithStoresNotBuilt) {
    EXPECT_EQ(run("health").exit_code, 0);
    EXPECT_EQ(run("query 'What is the melting temperature of PHB?' -p vector").exit_code, 4);
}

TEST_F(CliTest, IngestBuildQueryEvalRoundTrip) {
    auto ingested = run("ingest '" + demo("corpus.jsonl") + "' -k '" + demo("keywords.txt") + "'");
    ASSERT_EQ(ingested.exit_code, 0);
    EXPECT_GT(json::parse(ingested.out).at("paragraphs").get<int>(), 0);

    auto built = run("build --coarse-k 4 --threshold 0.5");
    ASSERT_EQ(built.exit_code, 0);
    EXPECT_GT(json::parse(built.out).at("build_kg").at("tuples_stored").get<int>(), 0);
    EXPECT_EQ(json::parse(run("health").out).at("status"), "ready");

    auto graph = run("query 'What is the melting temperature of PHB?' -p graph --alpha 0.5 --tau 0.5");
    ASSERT_EQ(graph.exit_code, 0);
    auto g = json::parse(graph.out);
    EXPECT_FALSE(g.at("evidence").empty());
    auto ref = g.at("evidence").at(0).at("ref").get<std::string>();
    auto evidence = run("evidence " + ref);
    EXPECT_EQ(evidence.exit_code, 0);
    EXPECT_EQ(json::parse(evidence.out).at("ref"), ref);
    EXPECT_EQ(run("evidence t_00ff").exit_code, 1);

    auto vec = run("query 'What is the tensile strength of PLA?' -p vector --k 2");
    ASSERT_EQ(vec.exit_code, 0);
    EXPECT_LE(json::parse(vec.out).at("evidence").size(), 2u);

    auto report = tmp("report.json");
    auto eval = run("eval -p vector -q '" + demo("questions.jsonl") + "' --recall-k 8 -o '" + report + "'");
    ASSERT_EQ(eval.exit_code, 0);
    EXPECT_NE(eval.out.find("Recall PID"), std::string::npos);
    std::ifstream in(report);
    auto j = json::parse(in);
    EXPECT_FALSE(j.at("records").empty());

    EXPECT_EQ(run("accuracy '" + report + "' q1 1").exit_code, 0);
    EXPECT_NE(run("accuracy '" + report + "' missing 1").exit_code, 0);
    EXPECT_EQ(run("table '" + report + "'").exit_code, 0);
}

TEST_F(CliTest, EmptyQuestionFileExitsThree) {
    auto empty = tmp("empty.jsonl");
    std::ofstream(empty) << "\n";
    ASSERT_EQ(run("ingest '" + demo("corpus.jsonl") + "'").exit_code, 0);
    ASSERT_EQ(run("index-vectors").exit_code, 0);
    EXPECT_EQ(run("eval -p vector -q '" + empty + "' -o '" + tmp("r.json") + "'").exit_code, 3);
}

TEST_F(CliTest, FeedbackAndParameterValidation) {
    auto fb = run("feedback --qid q1 -p graph --content 5 --citation 4");
    ASSERT_EQ(fb.exit_code, 0);
    EXPECT_EQ(json::parse(fb.out).at("total"), 9);
    auto summary = json::parse(run("feedback-summary").out);
    EXPECT_EQ(summary.at("pipelines").at("graph").at("count"), 1);

    EXPECT_NE(run("feedback --qid q1 -p graph --content 6 --citation 4").exit_code, 0);
    EXPECT_NE(run("query x -p graph --alpha 1.5").exit_code, 0);
    EXPECT_NE(run("canonicalize --coarse-k 0").exit_code, 0);
    EXPECT_NE(run("query x -p hybrid").exit_code, 0);

    auto cfg = json::parse(run("config").out);
    EXPECT_EQ(cfg.at("canonicalize").at("coarse_k"), 8);
    EXPECT_EQ(cfg.at("store"), store_.path());
}

}  // namespace
}  // namespace scholar
