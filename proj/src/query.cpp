#include "scholar/query.hpp"

#include "scholar/errors.hpp"
#include "scholar/resources.hpp"
#include "scholar/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace scholar::query {

namespace {

bool boundary_at(std::string_view s, std::size_t pos) {
    return pos >= s.size() || !text::is_word_byte(s[pos]);
}

}  // namespace

DomainPatterns DomainPatterns::parse(std::string_view content) {
    DomainPatterns out;
    for (const auto& raw : text::lines(content)) {
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        try {
            out.patterns.emplace_back(std::string(line), std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw ConfigError("invalid domain pattern '" + std::string(line) + "': " + e.what());
        }
        out.sources.emplace_back(line);
    }
    return out;
}

DomainPatterns DomainPatterns::defaults() { return parse(resources::get("domain_patterns.txt")); }

std::size_t DomainPatterns::longest_match(std::string_view text, std::size_t pos) const {
    std::size_t best = 0;
    auto first = text.begin() + static_cast<std::ptrdiff_t>(pos);
    for (const auto& re : patterns) {
        std::match_results<std::string_view::const_iterator> m;
        if (!std::regex_search(first, text.end(), m, re, std::regex_constants::match_continuous)) continue;
        auto len = static_cast<std::size_t>(m.length(0));
        if (len > best && boundary_at(text, pos + len)) best = len;
    }
    return best;
}

std::set<std::string, std::less<>> Lexicon::parse_stopwords(std::string_view content) {
    std::set<std::string, std::less<>> out;
    for (const auto& raw : text::lines(content)) {
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        out.insert(text::to_lower(line));
    }
    return out;
}

Lexicon Lexicon::defaults() {
    Lexicon lex;
    lex.stopwords = parse_stopwords(resources::get("stopwords_en.txt"));
    lex.domain = DomainPatterns::defaults();
    return lex;
}

std::string lemmatize(std::string_view token) {
    static const std::map<std::string, std::string, std::less<>> kIrregular = {
        {"analyses", "analysis"}, {"indices", "index"},   {"matrices", "matrix"}, {"vertices", "vertex"},
        {"theses", "thesis"},     {"hypotheses", "hypothesis"}, {"species", "species"}, {"series", "series"},
        {"data", "data"},         {"media", "media"},      {"criteria", "criterion"}, {"phenomena", "phenomenon"},
        {"children", "child"},    {"men", "man"},          {"women", "woman"},     {"mice", "mouse"},
        {"leaves", "leaf"},       {"lives", "life"}};
    std::string t(token);
    if (auto it = kIrregular.find(t); it != kIrregular.end()) return it->second;
    if (t.size() <= 3 || t.back() != 's') return t;
    auto ends = [&](std::string_view suffix) {
        return t.size() >= suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends("ss") || ends("us") || ends("is") || ends("ous")) return t;
    if (ends("ies") && t.size() > 4) return t.substr(0, t.size() - 3) + "y";
    if (ends("sses") || ends("xes") || ends("ches") || ends("shes") || ends("zes")) return t.substr(0, t.size() - 2);
    return t.substr(0, t.size() - 1);
}

std::vector<std::string> preprocess_query(std::string_view query, const Lexicon& lexicon) {
    const std::string s = text::to_lower(query);
    std::vector<std::string> keywords;
    auto add = [&](std::string kw) {
        kw = text::normalize_whitespace(kw);
        if (kw.empty()) return;
        if (std::find(keywords.begin(), keywords.end(), kw) == keywords.end()) keywords.push_back(std::move(kw));
    };

    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        bool token_start = i == 0 || !text::is_word_byte(s[i - 1]);
        if (token_start && !std::isspace(c)) {
            if (auto len = lexicon.domain.longest_match(s, i); len > 0) {
                add(s.substr(i, len));
                i += len;
                continue;
            }
        }
        if (!text::is_word_byte(s[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && text::is_word_byte(s[j])) ++j;
        std::string word = s.substr(i, j - i);
        i = j;
        if (lexicon.stopwords.contains(word)) continue;
        auto lemma = lemmatize(word);
        if (lexicon.stopwords.contains(lemma)) continue;
        add(std::move(lemma));
    }
    if (keywords.empty()) throw EmptyQueryError();
    return keywords;
}

}  // namespace scholar::query
