#pragma once

#include "scholar/graph_retriever.hpp"
#include "scholar/prompt_template.hpp"
#include "scholar/providers.hpp"
#include "scholar/vector_index.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scholar::answer {

inline constexpr std::string_view kDefaultAbstention = "I do not know";

enum class EvidenceKind { chunk, tuple };

std::string_view to_string(EvidenceKind kind);

/// Stable opaque reference for an evidence item: "c_<hex chunk id>" or
/// "t_<hex tuple id>". It encodes the store id, so it resolves for as long
/// as the item exists.
std::string make_ref(EvidenceKind kind, const std::string& id);
/// Inverse of make_ref. Throws NotFoundError for malformed refs.
std::pair<EvidenceKind, std::string> parse_ref(const std::string& ref);

struct EvidenceItem {
    int index = 0;  // 1-based, as cited in answers
    EvidenceKind kind = EvidenceKind::chunk;
    std::string ref;
    std::string text;
    std::string source_doi;
    std::vector<std::string> source_pids;
    double score = 0.0;
    std::optional<kg::TupleFields> tuple;  // tuple evidence only
};

struct EvidenceSet {
    std::vector<EvidenceItem> items;
    bool empty() const { return items.empty(); }
};

EvidenceSet evidence_from_chunks(const std::vector<vector::RankedChunk>& chunks);
EvidenceSet evidence_from_tuples(const std::vector<graph::ScoredTuple>& tuples, const graph::GraphSnapshot& snapshot);

struct ContextOptions {
    /// Whitespace-token budget for the whole prompt; 0 means unlimited.
    std::size_t token_budget = 0;
    std::string abstention = std::string(kDefaultAbstention);
};

struct BuiltContext {
    std::string prompt;
    std::vector<int> included;  // evidence indices present in the prompt
    std::size_t dropped = 0;
    std::size_t prompt_tokens = 0;
};

/// The embedded answer prompt (requires {evidence} and {query}).
PromptTemplate default_answer_template();

/// Renders "[n] <text> (source: <doi>)" evidence lines into the template.
/// Over budget, the lowest-scored items are dropped first (ties: the later
/// item); the remaining items keep their indices. With no evidence the
/// prompt instructs the model to abstain.
BuiltContext build_context(const std::string& query, const EvidenceSet& evidence, const PromptTemplate& prompt,
                           const ContextOptions& options = {});

struct Answer {
    std::string text;
    std::vector<int> citations;  // distinct, in order of first appearance
    std::vector<int> context_indices;
    bool abstained = false;
    bool failed = false;
    std::string error_tag;
    double latency_seconds = 0.0;
    double cost = 0.0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::string model_id;
    std::vector<std::string> diagnostics;
};

/// Bracketed integer citations "[n]" in order of first appearance.
std::vector<int> parse_citations(std::string_view text);

/// One generation call over the built context. Empty evidence abstains
/// without calling the provider. Provider failures are reported in the
/// returned Answer (failed = true) instead of thrown.
Answer synthesize(const std::string& query, const EvidenceSet& evidence, providers::Generator& generator,
                  const PromptTemplate& prompt, const ContextOptions& options = {});

struct CitationReport {
    std::vector<int> dangling;  // cited indices absent from the prompt's evidence
    bool abstained_with_citations = false;
    bool ok() const { return dangling.empty() && !abstained_with_citations; }
};

CitationReport validate_citations(const Answer& answer);

}  // namespace scholar::answer
