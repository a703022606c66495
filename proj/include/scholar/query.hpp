#pragma once

#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace scholar::query {

/// Regular expressions recognising domain entities (polymer acronyms,
/// copolymer notation, formulas, numbers with units) in a lowercased query.
struct DomainPatterns {
    std::vector<std::regex> patterns;
    std::vector<std::string> sources;

    /// One ECMAScript regex per line, '#' comments. Throws ConfigError.
    static DomainPatterns parse(std::string_view content);
    static DomainPatterns defaults();

    /// Length of the longest pattern match starting at `pos` that ends at a
    /// token boundary, 0 when nothing matches.
    std::size_t longest_match(std::string_view text, std::size_t pos) const;
};

struct Lexicon {
    std::set<std::string, std::less<>> stopwords;
    DomainPatterns domain;

    static std::set<std::string, std::less<>> parse_stopwords(std::string_view content);
    static Lexicon defaults();
};

/// Plural-folding lemmatizer for lowercase English tokens ("polymers" ->
/// "polymer", "properties" -> "property"). Verb forms are left alone.
std::string lemmatize(std::string_view token);

/// Lowercases, keeps domain entities intact, lemmatizes the other word
/// tokens and drops stopwords. Keywords are deduplicated in first-appearance
/// order. Throws EmptyQueryError when nothing is left.
std::vector<std::string> preprocess_query(std::string_view query, const Lexicon& lexicon);

}  // namespace scholar::query
