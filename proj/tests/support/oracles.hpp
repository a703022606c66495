#pragma once

// Brute-force reference implementations. They share no code with the
// library beyond plain data types, so a disagreement points at one side.

#include "scholar/canonicalizer.hpp"
#include "scholar/corpus.hpp"
#include "scholar/kg.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace scholar::testing::oracle {

/// Linear scan over the first min(k, size) items.
int membership(const std::string& expected, const std::vector<std::string>& list, std::size_t k);

double dot(const std::vector<float>& a, const std::vector<float>& b);
double cosine(const std::vector<float>& a, const std::vector<float>& b);

struct Ranked {
    std::string id;
    double score = 0.0;
};

/// Full sort of every (id, vector) by cosine to `query`, ties by id.
std::vector<Ranked> brute_force_rank(const std::vector<float>& query,
                                     const std::vector<std::pair<std::string, std::vector<float>>>& items);

/// Min-max normalization with the all-equal batch mapped to 1.0.
std::vector<double> min_max(const std::vector<double>& raw);

/// Naive average-linkage clustering: every round recomputes every pairwise
/// cluster distance from member vectors and merges the closest pair while it
/// is strictly below `threshold`. Ties pick the pair whose (smaller, larger)
/// smallest member surfaces sort first. Returns sorted surface lists, sorted.
std::vector<std::vector<std::string>> average_linkage(const std::vector<canon::EntityRecord>& records,
                                                      double threshold);

/// Label the library should elect for a cluster of surfaces: member with the
/// highest cosine to the mean vector (ties: smallest surface), or
/// "numerical_value" when more than `numeric_fraction` of members are numeric
/// per `is_numeric`.
std::string expected_label(const std::vector<canon::EntityRecord>& members, double numeric_fraction,
                           const std::vector<bool>& is_numeric);

/// Word-boundary, case-insensitive containment written with plain loops.
bool has_word(const std::string& haystack, const std::string& needle);

/// Phase-1/phase-2 string retrieval reference.
std::map<std::size_t, double> string_phases(const std::vector<std::string>& keywords,
                                            const std::vector<kg::KgTuple>& tuples);

/// Expected chunk grouping key per paragraph: doi, top-level heading index
/// and first-level subsection index (-1 for direct paragraphs).
struct GroupKey {
    std::string doi;
    int top = 0;
    int sub = -1;
    auto operator<=>(const GroupKey&) const = default;
};

/// Every non-blank paragraph text with its group key, in document order.
std::vector<std::pair<GroupKey, std::string>> grouped_paragraphs(const corpus::Document& doc);

}  // namespace scholar::testing::oracle
