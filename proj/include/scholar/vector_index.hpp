#pragma once

#include "scholar/corpus.hpp"
#include "scholar/db.hpp"
#include "scholar/providers.hpp"

#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace scholar::vector {

inline constexpr std::size_t kDefaultK = 8;

struct IndexEntry {
    std::string chunk_id;
    providers::EmbeddingVector vector;
    std::string doi;
    std::vector<std::string> member_pids;
    std::string text;
};

struct RankedChunk {
    std::string chunk_id;
    double score = 0.0;  // cosine, in [-1, 1]
    int rank = 0;        // 1-based
    std::string doi;
    std::vector<std::string> member_pids;
    std::string text;
};

/// Orders by descending score, ties by ascending chunk id.
bool ranks_before(double score_a, const std::string& id_a, double score_b, const std::string& id_b);

/// Dense chunk index over the `vectors` table with exhaustive cosine retrieval.
/// Retrieval runs against an immutable in-memory snapshot of committed rows,
/// so concurrent readers never observe a half-written build.
class VectorIndex {
public:
    explicit VectorIndex(db::Database& db);

    /// Embeds and stores every chunk (replacing entries with the same id) and
    /// returns the total number of entries. Chunks whose embedding fails are
    /// skipped; the rest are committed and PartialIndexError names the failures.
    std::size_t index_chunks(const std::vector<corpus::Chunk>& chunks, providers::Embedder& embedder,
                             std::size_t batch_size = 32);

    /// min(k, size) chunks by descending cosine to the embedded query.
    /// Throws PreconditionError for k < 1 and EmptyIndexError when empty.
    std::vector<RankedChunk> retrieve_topk(const std::string& query, std::size_t k,
                                           providers::Embedder& embedder);

    /// Exhaustive scan with an already embedded query.
    std::vector<RankedChunk> rank(const providers::EmbeddingVector& query, std::size_t k);

    std::size_t size();
    /// Re-reads committed rows; call after another connection finished a build.
    void reload();

private:
    using Snapshot = std::vector<IndexEntry>;
    std::shared_ptr<const Snapshot> snapshot();

    db::Database& db_;
    std::mutex mutex_;
    std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace scholar::vector
