#include "fixtures.hpp"

#include "scholar/engine.hpp"
#include "scholar/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace scholar {
namespace {

bool contains(const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

class EngineTest : public ::testing::Test {
protected:
    void build() {
        planted_ = testing::make_planted_corpus(3, 2, 1, 77);
        engine_.ingest(planted_.docs, {});
        engine_.index_vectors();
        engine_.build_kg();
        engine_.canonicalize();
    }

    testing::TempStore store_;
    Engine engine_{testing::local_config(store_.path())};
    testing::PlantedCorpus planted_;
};

TEST(PipelineNameTest, ParsesBothNames) {
    EXPECT_EQ(pipeline_from_string("vector"), Pipeline::vector);
    EXPECT_EQ(pipeline_from_string("graph"), Pipeline::graph);
    EXPECT_EQ(to_string(Pipeline::graph), "graph");
    EXPECT_THROW(pipeline_from_string("hybrid"), PreconditionError);
}

TEST_F(EngineTest, EmptyStoreReportsEmptyAndRefusesQueries) {
    EXPECT_EQ(engine_.stats().status(), "empty");
    EXPECT_THROW(engine_.query(Pipeline::vector, "melting temperature of PHB"), EmptyIndexError);
    EXPECT_THROW(engine_.query(Pipeline::graph, "melting temperature of PHB"), EmptyIndexError);
}

TEST_F(EngineTest, BothPipelinesAnswerPlantedFacts) {
    build();
    for (const auto& q : planted_.questions) {
        const auto& fact = *std::find_if(planted_.facts.begin(), planted_.facts.end(),
                                         [&](const auto& f) { return f.pid == q.expected_pid; });
        for (auto p : {Pipeline::vector, Pipeline::graph}) {
            auto out = engine_.query(p, q.question);
            EXPECT_TRUE(contains(out.retrieved_pids, fact.pid)) << q.qid << " " << to_string(p);
            EXPECT_TRUE(contains(out.retrieved_dois, fact.doi));
            EXPECT_NE(out.answer.text.find(fact.value), std::string::npos) << out.answer.text;
            EXPECT_FALSE(out.answer.citations.empty());
            EXPECT_TRUE(out.citation_report.ok());
            EXPECT_EQ(out.retrieved_pids.size(), out.retrieved_dois.size());
            if (p == Pipeline::graph) {
                ASSERT_TRUE(out.subgraph.has_value());
                EXPECT_FALSE(out.keywords.empty());
            } else {
                EXPECT_LE(out.evidence.items.size(), engine_.config().k);
            }
        }
    }
}

TEST_F(EngineTest, UnanswerableQuestionAbstains) {
    build();
    const auto& q = planted_.unanswerable.at(0);
    for (auto p : {Pipeline::vector, Pipeline::graph}) {
        auto out = engine_.query(p, q.question);
        EXPECT_TRUE(out.answer.abstained) << to_string(p) << ": " << out.answer.text;
        EXPECT_TRUE(out.answer.citations.empty());
    }
}

TEST_F(EngineTest, EvidenceRefsResolveToProvenance) {
    build();
    const auto& q = planted_.questions.at(0);
    auto vec = engine_.query(Pipeline::vector, q.question, {std::size_t{2}, std::nullopt, std::nullopt});
    ASSERT_FALSE(vec.evidence.items.empty());
    EXPECT_LE(vec.evidence.items.size(), 2u);
    auto chunk = engine_.evidence(vec.evidence.items[0].ref);
    ASSERT_TRUE(chunk.chunk.has_value());
    EXPECT_EQ(chunk.paragraphs.size(), chunk.chunk->member_pids.size());

    auto graph = engine_.query(Pipeline::graph, q.question);
    ASSERT_FALSE(graph.evidence.items.empty());
    auto tuple = engine_.evidence(graph.evidence.items[0].ref);
    ASSERT_TRUE(tuple.tuple.has_value());
    ASSERT_EQ(tuple.paragraphs.size(), 1u);
    EXPECT_EQ(tuple.paragraphs[0].pid, tuple.tuple->source_pid);

    EXPECT_THROW(engine_.evidence("t_00ff"), NotFoundError);
    EXPECT_THROW(engine_.evidence("bogus"), NotFoundError);
}

TEST_F(EngineTest, StatsMatchStoreContents) {
    build();
    auto s = engine_.stats(3);
    EXPECT_EQ(s.status(), "ready");
    EXPECT_EQ(s.documents, planted_.docs.size());
    std::size_t paragraphs = 0;
    for (const auto& d : planted_.docs) paragraphs += testing::count_paragraphs(d);
    EXPECT_EQ(s.paragraphs, paragraphs);
    EXPECT_EQ(s.vectors, s.chunks);
    EXPECT_GE(s.tuples, planted_.facts.size());
    EXPECT_GE(s.entities, s.canonicals);
    EXPECT_LE(s.top_clusters.size(), 3u);
    for (std::size_t i = 1; i < s.top_clusters.size(); ++i) {
        EXPECT_GE(s.top_clusters[i - 1].member_count, s.top_clusters[i].member_count);
    }
}

TEST_F(EngineTest, EvalRunnerFeedsHarness) {
    build();
    auto questions = planted_.questions;
    questions.push_back(planted_.unanswerable.at(0));
    QueryOptions options;
    options.k = 8;
    auto report = eval::run_eval(questions, engine_.eval_runner(Pipeline::vector, options),
                                 {"vector", "local-template", "8 chunks", 8});
    auto a = report.aggregate();
    EXPECT_EQ(a.answerable, planted_.questions.size());
    EXPECT_EQ(a.failed, 0u);
    EXPECT_DOUBLE_EQ(*a.recall, 1.0);
    EXPECT_DOUBLE_EQ(*a.mean_cost, 0.0);
}

}  // namespace
}  // namespace scholar
