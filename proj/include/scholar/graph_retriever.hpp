#pragma once

#include "scholar/canonicalizer.hpp"
#include "scholar/db.hpp"
#include "scholar/kg.hpp"
#include "scholar/providers.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace scholar::graph {

struct RetrievalParams {
    double alpha = 0.7;   // canonical weight in the hybrid score
    double tau = 0.6;     // hybrid score cut-off after normalization
    double lambda = 0.7;  // rerank weight in the final score
    std::size_t max_tuples = 300;
    double canonical_sim_threshold = 0.7;  // strict
    std::size_t rerank_pool_factor = 4;

    /// Throws PreconditionError for weights outside [0, 1] or max_tuples == 0.
    void validate() const;
};

/// Immutable view of the tuple and canonical stores used by one or more queries.
struct GraphSnapshot {
    std::vector<kg::KgTuple> tuples;
    canon::Canonicalization canonical;
    std::map<std::string, std::size_t> canonical_index;  // canonical_id -> entities position

    static std::shared_ptr<const GraphSnapshot> load(db::Database& db);
    static std::shared_ptr<const GraphSnapshot> from(std::vector<kg::KgTuple> tuples, canon::Canonicalization c);
};

struct ScoredTuple {
    std::size_t index = 0;  // position in the snapshot
    double s_string = 0.0;
    double s_canonical = 0.0;
    double s_hybrid = 0.0;
    double s_rerank = 0.0;
    double s_final = 0.0;
};

/// Exact keyword matching over subject, relation and object. Tuples matching
/// every keyword are returned; when there are none, tuples matching at least
/// two keywords. Score = matched keywords / total keywords.
std::map<std::size_t, double> string_retrieve(const std::vector<std::string>& keywords,
                                              const std::vector<kg::KgTuple>& tuples);

/// Canonical entities whose similarity to some keyword is strictly above the
/// threshold, with the best similarity per entity.
std::map<std::string, double> match_canonicals(const std::vector<providers::EmbeddingVector>& keyword_vectors,
                                               const canon::Canonicalization& canonical, double threshold);

/// Tuples whose subject or object belongs to a matched canonical entity,
/// scored with the best similarity among their matched entities.
std::map<std::size_t, double> canonical_retrieve(const std::map<std::string, double>& matched,
                                                 const GraphSnapshot& snapshot);

/// Union of both candidate sets, raw score alpha*s_canonical +
/// (1-alpha)*s_string, min-max normalized over the union (all 1.0 when the
/// scores are equal), candidates below tau dropped. Sorted by s_hybrid
/// descending, ties by tuple id.
std::vector<ScoredTuple> hybrid_fuse(const std::map<std::size_t, double>& string_scores,
                                     const std::map<std::size_t, double>& canonical_scores, double alpha, double tau,
                                     const GraphSnapshot& snapshot);

struct RerankOutcome {
    std::vector<ScoredTuple> tuples;
    bool rerank_skipped = false;
    std::string diagnostic;
};

/// Scores the top rerank_pool_factor*max_tuples candidates against the query
/// with the cross scorer, combines lambda*s_rerank + (1-lambda)*s_hybrid and
/// keeps max_tuples. If the scorer fails the hybrid order is kept and the
/// outcome is flagged.
RerankOutcome path_rerank(const std::string& query, std::vector<ScoredTuple> candidates,
                          providers::CrossScorer& scorer, const RetrievalParams& params, const GraphSnapshot& snapshot);

struct SubgraphNode {
    std::string id;  // canonical id, or "surface:<text>" for unmapped entities
    std::string label;
    bool operator==(const SubgraphNode&) const = default;
};

struct SubgraphEdge {
    std::string source;
    std::string target;
    std::string relation;
    std::string tuple_id;
};

struct Subgraph {
    std::vector<SubgraphNode> nodes;
    std::vector<SubgraphEdge> edges;
};

Subgraph assemble_subgraph(const std::vector<ScoredTuple>& tuples, const GraphSnapshot& snapshot);

struct GraphResult {
    std::vector<std::string> keywords;
    std::vector<ScoredTuple> tuples;
    Subgraph subgraph;
    std::size_t string_candidates = 0;
    std::size_t canonical_candidates = 0;
    std::size_t matched_canonicals = 0;
    bool rerank_skipped = false;
    std::vector<std::string> diagnostics;
};

/// Full graph retrieval for already preprocessed keywords.
/// Throws EmptyIndexError when the snapshot has no tuples.
GraphResult retrieve(const std::string& query, const std::vector<std::string>& keywords,
                     const GraphSnapshot& snapshot, providers::Embedder& embedder, providers::CrossScorer& scorer,
                     const RetrievalParams& params = {});

}  // namespace scholar::graph
