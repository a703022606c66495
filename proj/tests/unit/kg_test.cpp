#include "fixtures.hpp"

#include "scholar/corpus.hpp"
#include "scholar/errors.hpp"
#include "scholar/kg.hpp"

#include <gtest/gtest.h>

#include <fmt/format.h>

#include <set>

namespace scholar::kg {
namespace {

using testing::TempStore;

providers::ProviderConfig stub_config() {
    providers::ProviderConfig cfg;
    cfg.role = providers::Role::generate;
    cfg.model_id = "local-rules";
    return cfg;
}

/// Generator replaying canned replies in order; "!" makes the call fail.
class ScriptedGenerator final : public providers::Generator {
public:
    explicit ScriptedGenerator(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    providers::GenerationResult generate(const std::string&) override {
        auto reply = replies_.at(std::min(calls_++, replies_.size() - 1));
        if (reply == "!") throw ProviderError("upstream down", true, 3, "http");
        return {reply, 10, 10, 0.0};
    }
    const providers::ProviderConfig& config() const override { return cfg_; }
    std::size_t calls() const { return calls_; }

private:
    std::vector<std::string> replies_;
    std::size_t calls_ = 0;
    providers::ProviderConfig cfg_ = stub_config();
};

corpus::Paragraph paragraph(std::string text, std::string pid = "10.1/kg#p0") {
    return {pid, "10.1/kg", {"Results"}, 0, 0, std::move(text)};
}

/// Stores one document with `n` paragraphs so tuple provenance resolves.
void seed_paragraphs(db::Database& db, std::size_t n) {
    corpus::Document doc{"10.1/kg", "PHB", "", {{"Results", 1, {}, {}}}};
    for (std::size_t i = 0; i < n; ++i) doc.sections[0].paragraphs.push_back(fmt::format("paragraph {}", i));
    auto ps = corpus::extract_paragraphs(doc);
    corpus::ParagraphStore(db).replace_documents({doc}, ps, corpus::chunk_paragraphs(ps));
}

KgTuple tuple(std::string id, std::string s, std::string r, std::string o, std::string pid = "10.1/kg#p0") {
    KgTuple t;
    t.tuple_id = std::move(id);
    t.subject = std::move(s);
    t.relation = std::move(r);
    t.object = std::move(o);
    t.source_pid = std::move(pid);
    t.source_doi = "10.1/kg";
    return t;
}

TEST(ParseExtractionTest, StrictFiveFieldLines) {
    auto parsed = parse_extraction("PHB|has property|Tg||\nbad line\nPLA|blended with|PBAT|to improve|toughness\n"
                                   " |has|x||\na|b|c|d\n");
    ASSERT_EQ(parsed.tuples.size(), 2u);
    EXPECT_EQ(parsed.malformed_lines, 3u);
    EXPECT_EQ(parsed.tuples[0].subject, "PHB");
    EXPECT_EQ(parsed.tuples[1].reference_relation, "to improve");
    EXPECT_EQ(parsed.tuples[1].reference_node, "toughness");
    EXPECT_FALSE(parsed.unparseable());
}

TEST(ParseExtractionTest, NoneAndGarbage) {
    EXPECT_TRUE(parse_extraction("NONE").tuples.empty());
    EXPECT_FALSE(parse_extraction("  none \n").unparseable());
    EXPECT_FALSE(parse_extraction("").unparseable());
    EXPECT_TRUE(parse_extraction("I cannot comply.").unparseable());
}

TEST(CitationMarkerTest, FindsFiguresTablesAndBrackets) {
    auto m = find_citation_markers("As shown in Fig. 3a and Table 2, PHB is brittle [12, 14]. See Figure 4 [3].");
    EXPECT_EQ(m, (std::vector<std::string>{"Fig. 3a", "Table 2", "[12, 14]", "Figure 4", "[3]"}));
}

TEST(StubExtractorTest, GlassTransitionFact) {
    StubExtractionGenerator stub(stub_config(), default_rules());
    auto out = extract_tuples(paragraph("PHB has property Tg."), stub, default_extraction_template());
    ASSERT_EQ(out.tuples.size(), 1u);
    EXPECT_EQ(out.tuples[0].subject, "PHB");
    EXPECT_EQ(out.tuples[0].relation, "has property");
    EXPECT_EQ(out.tuples[0].object, "Tg");
    EXPECT_EQ(out.tuples[0].tuple_id, "10.1/kg#p0#t0");
    EXPECT_FALSE(out.diagnostic);
}

TEST(StubExtractorTest, BoilerplateYieldsNothing) {
    StubExtractionGenerator stub(stub_config(), default_rules());
    auto out = extract_tuples(paragraph("Acknowledgements. The authors thank the funding agency."), stub,
                              default_extraction_template());
    EXPECT_TRUE(out.tuples.empty());
    EXPECT_FALSE(out.diagnostic);
}

TEST(StubExtractorTest, ThreePlantedPatterns) {
    StubExtractionGenerator stub(stub_config(), default_rules());
    auto out = extract_tuples(paragraph("PHBV exhibits a melting temperature of 153 C. "
                                        "PHB is synthesized from glucose. Samples were dried overnight. "
                                        "PLA is blended with PBAT to improve toughness. Values are listed in Table 2."),
                              stub, default_extraction_template());
    ASSERT_EQ(out.tuples.size(), 3u);
    std::vector<TupleFields> expected = {{"PHBV", "has melting temperature", "153 C", "", ""},
                                         {"PHB", "synthesized with", "glucose", "", ""},
                                         {"PLA", "blended with", "PBAT", "improve", "toughness"}};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(out.tuples[i].subject, expected[i].subject);
        EXPECT_EQ(out.tuples[i].relation, expected[i].relation);
        EXPECT_EQ(out.tuples[i].object, expected[i].object);
        EXPECT_EQ(out.tuples[i].reference_relation, expected[i].reference_relation);
        EXPECT_EQ(out.tuples[i].reference_node, expected[i].reference_node);
        EXPECT_EQ(out.tuples[i].citation_markers, std::vector<std::string>{"Table 2"});
    }
}

TEST(StubExtractorTest, SplitsSentences) {
    EXPECT_EQ(split_sentences("One. Two? Three! 3.5 stays"),
              (std::vector<std::string>{"One.", "Two?", "Three!", "3.5 stays"}));
}

TEST(ExtractTuplesTest, ReasksWhileUnparseable) {
    ScriptedGenerator gen({"garbage", "PHB|has property|Tg||"});
    auto out = extract_tuples(paragraph("PHB text"), gen, default_extraction_template());
    EXPECT_EQ(gen.calls(), 2u);
    ASSERT_EQ(out.tuples.size(), 1u);
    ASSERT_TRUE(out.diagnostic);
    EXPECT_EQ(out.diagnostic->malformed_lines, 1u);
}

TEST(ExtractTuplesTest, GivesUpWithDiagnostic) {
    ScriptedGenerator gen({"garbage"});
    auto out = extract_tuples(paragraph("PHB text"), gen, default_extraction_template(), 3);
    EXPECT_EQ(gen.calls(), 3u);
    EXPECT_TRUE(out.tuples.empty());
    ASSERT_TRUE(out.diagnostic);
    EXPECT_EQ(out.diagnostic->attempts, 3);
}

TEST(ExtractTuplesTest, ProviderFailureIsDiagnosticNotThrow) {
    ScriptedGenerator gen({"!"});
    auto out = extract_tuples(paragraph("PHB text"), gen, default_extraction_template());
    EXPECT_TRUE(out.tuples.empty());
    ASSERT_TRUE(out.diagnostic);
    EXPECT_EQ(out.diagnostic->attempts, 3);
    EXPECT_NE(out.diagnostic->message.find("upstream down"), std::string::npos);
}

TEST(RulesTest, ParseRejectsBadLines) {
    EXPECT_THROW(parse_rules("no tab here"), ConfigError);
    EXPECT_THROW(parse_rules("([a-\t$1|r|o||"), ConfigError);
    EXPECT_EQ(parse_rules("# c\n^(.+) eats (.+)$\t$1|eats|$2||\n").size(), 1u);
}

TEST(TupleStoreTest, DuplicateStoredOnce) {
    TempStore store;
    db::Database db(store.path());
    seed_paragraphs(db, 1);
    TupleStore ts(db);
    auto t = tuple("10.1/kg#p0#t0", "PHB", "has property", "Tg");
    EXPECT_EQ(ts.store_tuples({t}), 1u);
    EXPECT_EQ(ts.store_tuples({t}), 1u);
    auto again = t;
    again.tuple_id = "10.1/kg#p0#t9";
    EXPECT_EQ(ts.store_tuples({again}), 1u);
}

TEST(TupleStoreTest, RejectsEmptyRelationAndDanglingPid) {
    TempStore store;
    db::Database db(store.path());
    seed_paragraphs(db, 1);
    TupleStore ts(db);
    EXPECT_THROW(ts.store_tuples({tuple("a#t0", "PHB", "", "Tg")}), InvariantError);
    try {
        ts.store_tuples({tuple("ok#t0", "PHB", "has", "Tg"), tuple("x#t0", "PHB", "has", "Tm", "10.1/kg#p77")});
        FAIL();
    } catch (const IntegrityError& e) {
        EXPECT_EQ(e.pid(), "10.1/kg#p77");
    }
    // The batch is all-or-nothing.
    EXPECT_EQ(ts.count(), 0u);
}

TEST(TupleStoreTest, BatchWithDuplicatesAddsDistinctCount) {
    TempStore store;
    db::Database db(store.path());
    seed_paragraphs(db, 4);
    TupleStore ts(db);
    ts.store_tuples({tuple("seed#t0", "PLA", "has", "Tm", "10.1/kg#p3")});

    std::vector<KgTuple> batch;
    for (int i = 0; i < 8; ++i) {
        batch.push_back(tuple(fmt::format("b#t{}", i), fmt::format("E{}", i), "has", "X",
                              fmt::format("10.1/kg#p{}", i % 3)));
    }
    batch.push_back(batch[2]);
    auto dup = batch[5];
    dup.tuple_id = "b#t99";
    batch.push_back(dup);
    ASSERT_EQ(batch.size(), 10u);

    // Oracle: set cardinality over (subject, relation, object, source_pid).
    std::set<std::tuple<std::string, std::string, std::string, std::string>> keys;
    for (const auto& t : batch) keys.emplace(t.subject, t.relation, t.object, t.source_pid);
    auto before = ts.count();
    EXPECT_EQ(ts.store_tuples(batch), before + keys.size());
    EXPECT_EQ(keys.size(), 8u);
}

TEST(TupleStoreTest, CorpusStats) {
    TempStore store;
    db::Database db(store.path());
    seed_paragraphs(db, 2);
    TupleStore ts(db);
    EXPECT_EQ(ts.corpus_stats(), CorpusStats{});

    ts.store_tuples({tuple("t#0", "PHB", "has", "Tg"), tuple("t#1", "PHB", "has", "Tm"),
                     tuple("t#2", "PHB", "has", "crystallinity", "10.1/kg#p1")});
    auto stats = ts.corpus_stats();
    EXPECT_EQ(stats.tuple_count, 3u);
    EXPECT_EQ(stats.entity_count, 4u);
    EXPECT_EQ(stats.per_doi_counts, (std::map<std::string, std::size_t>{{"10.1/kg", 3}}));
    EXPECT_EQ(ts.entity_frequencies().at("PHB"), 3u);

    // Recount from a full scan.
    std::set<std::string> entities;
    for (const auto& t : ts.tuples()) {
        entities.insert(t.subject);
        entities.insert(t.object);
    }
    EXPECT_EQ(entities.size(), stats.entity_count);
}

TEST(TupleStoreTest, MarkersRoundTrip) {
    TempStore store;
    db::Database db(store.path());
    seed_paragraphs(db, 1);
    TupleStore ts(db);
    auto t = tuple("m#t0", "PHB", "has", "Tg");
    t.citation_markers = {"Fig. 1", "[4]"};
    ts.store_tuples({t});
    EXPECT_EQ(ts.tuple("m#t0"), t);
    EXPECT_FALSE(ts.tuple("missing"));
}

TEST(BuildKgTest, ReplacesStoreAndRecordsDiagnostics) {
    TempStore store;
    db::Database db(store.path());
    corpus::Document doc{"10.1/kg", "PHB", "",
                         {{"Results", 1,
                           {"PHB has property Tg.", "Nothing to see.", "PLA is produced by fermentation.",
                            "PBS has a tensile strength of 34 MPa."},
                           {}}}};
    corpus::ingest(db, {doc}, {});
    StubExtractionGenerator stub(stub_config(), default_rules());
    std::size_t last_done = 0;
    auto summary = build_kg(db, stub, default_extraction_template(), 2,
                            [&](std::size_t done, std::size_t) { last_done = std::max(last_done, done); });
    EXPECT_EQ(summary.paragraphs, 4u);
    EXPECT_EQ(summary.tuples_stored, 3u);
    EXPECT_EQ(summary.failed_paragraphs, 0u);
    EXPECT_EQ(last_done, 4u);

    TupleStore ts(db);
    EXPECT_EQ(ts.count(), 3u);
    ScriptedGenerator broken({"!"});
    auto failed = build_kg(db, broken, default_extraction_template());
    EXPECT_EQ(failed.failed_paragraphs, 4u);
    EXPECT_EQ(ts.count(), 0u);
    EXPECT_EQ(ts.diagnostics().size(), 4u);
}

}  // namespace
}  // namespace scholar::kg
