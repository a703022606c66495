#pragma once

#include "scholar/db.hpp"
#include "scholar/providers.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace scholar::canon {

inline constexpr std::string_view kNumericLabel = "numerical_value";

struct EntityRecord {
    std::string surface;
    providers::EmbeddingVector vector;
    std::size_t frequency = 1;  // occurrences across tuples
};

struct CanonicalEntity {
    std::string canonical_id;
    std::string label;
    std::vector<std::string> members;  // sorted
    providers::EmbeddingVector centroid;
    /// Vector used for canonical retrieval: the elected member's embedding, or
    /// the centroid for numeric clusters.
    providers::EmbeddingVector embedding;
    bool is_numeric_cluster = false;
};

struct Canonicalization {
    std::vector<CanonicalEntity> entities;
    std::map<std::string, std::string> surface_to_id;
};

struct CanonicalizeOptions {
    std::size_t coarse_k = 2000;
    double distance_threshold = 0.5;
    std::uint64_t seed = 42;
    std::size_t batch_size = 256;
    int max_iterations = 100;
    /// A cluster is numeric when strictly more than this fraction of members is numeric.
    double numeric_fraction = 0.60;
    int workers = 1;
};

/// Optional sign, digits with optional decimal part and exponent, then
/// optionally a unit of at most 6 characters. A unit glued to the number
/// must start with a symbol (%, °, µ, /) or be a known unit, so monomer
/// notation such as "3HV" does not count as numeric.
bool is_numeric_surface(std::string_view surface);

/// One record per surface with a normalized vector and its tuple frequency
/// (1 when absent from `frequencies`). Throws PreconditionError on duplicates.
std::vector<EntityRecord> embed_entities(const std::vector<std::string>& surfaces,
                                         const std::map<std::string, std::size_t>& frequencies,
                                         providers::Embedder& embedder);

/// Seeded mini-batch k-means on the unit vectors. Returns the non-empty
/// clusters as index lists into `records`, each sorted ascending.
std::vector<std::vector<std::size_t>> coarse_cluster(const std::vector<EntityRecord>& records,
                                                     std::size_t n_clusters,
                                                     const CanonicalizeOptions& options = {});

/// Average-linkage agglomerative merging on cosine distance. Merging stops
/// when no pair of sub-clusters is closer than `distance_threshold`.
/// Ties go to the pair whose smallest member surfaces sort first.
/// Returns index lists into `cluster`.
std::vector<std::vector<std::size_t>> fine_merge(const std::vector<EntityRecord>& cluster,
                                                 double distance_threshold = 0.5);

/// Elects the member closest to the re-normalized centroid (ties: smallest
/// surface). Numeric clusters get the "numerical_value" label. The id is left
/// empty for the caller to assign.
CanonicalEntity select_canonical(const std::vector<EntityRecord>& sub_cluster, double numeric_fraction = 0.60);

/// coarse_cluster -> fine_merge -> select_canonical over all records.
Canonicalization canonicalize_all(const std::vector<EntityRecord>& records,
                                  const CanonicalizeOptions& options = {});

struct ClusterSize {
    std::string canonical_id;
    std::string label;
    std::size_t member_count = 0;
};

/// canonical_entities and canonical_map tables.
class CanonicalStore {
public:
    explicit CanonicalStore(db::Database& db);

    void save(const Canonicalization& c);
    Canonicalization load();
    std::size_t count();
    /// Largest clusters first (ties by label).
    std::vector<ClusterSize> cluster_size_ranking(std::size_t top);

private:
    db::Database& db_;
};

struct CanonicalizeSummary {
    std::size_t entities = 0;
    std::size_t canonicals = 0;
    std::size_t numeric_clusters = 0;
    std::size_t coarse_clusters = 0;
};

/// Reads entity surfaces from the tuple store, embeds, clusters and persists.
CanonicalizeSummary run_canonicalization(db::Database& db, providers::Embedder& embedder,
                                         const CanonicalizeOptions& options = {});

}  // namespace scholar::canon
