#include "scholar/errors.hpp"
#include "scholar/prompt_template.hpp"
#include "scholar/query.hpp"
#include "scholar/resources.hpp"
#include "scholar/text.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace scholar::query {
namespace {

bool has(const std::vector<std::string>& v, const std::string& x) { return std::find(v.begin(), v.end(), x) != v.end(); }

TEST(QueryTest, PhbvExampleKeepsDomainEntities) {
    auto kw = preprocess_query("How does 3HV content affect the melting temperature of PHBV copolymers?",
                               Lexicon::defaults());
    for (const char* expected : {"3hv", "content", "affect", "melting", "temperature", "phbv", "copolymer"}) {
        EXPECT_TRUE(has(kw, expected)) << expected;
    }
    EXPECT_FALSE(has(kw, "how"));
    EXPECT_FALSE(has(kw, "does"));
    EXPECT_FALSE(has(kw, "the"));
}

TEST(QueryTest, AllStopwordsIsEmptyQuery) {
    EXPECT_THROW(preprocess_query("the of and", Lexicon::defaults()), EmptyQueryError);
    EXPECT_THROW(preprocess_query("  ?! ", Lexicon::defaults()), EmptyQueryError);
}

TEST(QueryTest, CopolymerNotationStaysIntact) {
    auto kw = preprocess_query("P(3HB-co-4HB) films", Lexicon::defaults());
    EXPECT_TRUE(has(kw, "p(3hb-co-4hb)"));
    EXPECT_FALSE(has(kw, "3hb"));
    EXPECT_TRUE(has(kw, "film"));
}

TEST(QueryTest, NumbersWithUnitsAndFormulas) {
    auto kw = preprocess_query("Which films degrade at 58 °C releasing CO2?", Lexicon::defaults());
    EXPECT_TRUE(has(kw, "58 °c"));
    EXPECT_TRUE(has(kw, "co2"));
}

TEST(QueryTest, DomainMatchesBypassStopwords) {
    Lexicon lex = Lexicon::defaults();
    lex.stopwords.insert("pla");
    auto kw = preprocess_query("PLA blends", lex);
    EXPECT_TRUE(has(kw, "pla"));
}

TEST(QueryTest, KeywordsAreDeduplicatedInOrder) {
    auto kw = preprocess_query("polymer polymers Polymer blend", Lexicon::defaults());
    EXPECT_EQ(kw, (std::vector<std::string>{"polymer", "blend"}));
}

TEST(QueryTest, ShippedStopwordListHas180Entries) {
    auto entries = text::list_entries(resources::get("stopwords_en.txt"));
    EXPECT_EQ(entries.size(), 180u);
    EXPECT_EQ(Lexicon::defaults().stopwords.size(), 180u);
}

TEST(LemmatizeTest, FoldsPlurals) {
    EXPECT_EQ(lemmatize("polymers"), "polymer");
    EXPECT_EQ(lemmatize("properties"), "property");
    EXPECT_EQ(lemmatize("copolymers"), "copolymer");
    EXPECT_EQ(lemmatize("melting"), "melting");
    EXPECT_EQ(lemmatize("gas"), "gas");
    EXPECT_EQ(lemmatize("analysis"), "analysis");
}

TEST(DomainPatternsTest, RejectsBadRegex) {
    EXPECT_THROW(DomainPatterns::parse("p\\([0-9"), ConfigError);
    auto p = DomainPatterns::parse("# comment\nphb\n");
    EXPECT_EQ(p.sources.size(), 1u);
    EXPECT_EQ(p.longest_match("phb films", 0), 3u);
    EXPECT_EQ(p.longest_match("phbv films", 0), 0u);
}

TEST(PromptTemplateTest, ParsesVersionAndRequiresPlaceholders) {
    auto t = PromptTemplate::parse("#template answer v9\n#required {q}\nAsk: {q}", {"q"});
    EXPECT_EQ(t.version(), "answer v9");
    EXPECT_EQ(t.body(), "Ask: {q}");
    EXPECT_THROW(PromptTemplate::parse("No slots here", {"q"}), ConfigError);
}

TEST(PromptTemplateTest, RenderDoesNotRescanSubstitutions) {
    auto t = PromptTemplate::parse("{a} and {b} and {unknown}", {"a", "b"});
    EXPECT_EQ(t.render({{"a", "{b}"}, {"b", "x"}}), "{b} and x and {unknown}");
}

TEST(PromptTemplateTest, ShippedPromptsCarryVersions) {
    auto answer = PromptTemplate::parse(resources::get("prompts/answer_v1.txt"), {"evidence", "query"});
    EXPECT_EQ(answer.version(), "answer v1");
    auto extract = PromptTemplate::parse(resources::get("prompts/extract_v1.txt"), {"paragraph"});
    EXPECT_FALSE(extract.version().empty());
}

}  // namespace
}  // namespace scholar::query
