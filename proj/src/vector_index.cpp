#include "scholar/vector_index.hpp"

#include "scholar/errors.hpp"

#include "json.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <optional>

namespace scholar::vector {

bool ranks_before(double score_a, const std::string& id_a, double score_b, const std::string& id_b) {
    if (score_a != score_b) return score_a > score_b;
    return id_a < id_b;
}

VectorIndex::VectorIndex(db::Database& db) : db_(db) { db::ensure_schema(db_); }

std::size_t VectorIndex::index_chunks(const std::vector<corpus::Chunk>& chunks, providers::Embedder& embedder,
                                      std::size_t batch_size) {
    if (chunks.empty()) throw PreconditionError("index_chunks needs at least one chunk");
    if (batch_size == 0) batch_size = 1;

    std::optional<std::size_t> dim;
    {
        auto s = db_.prepare("SELECT dim FROM vectors LIMIT 1");
        if (s.step()) dim = static_cast<std::size_t>(s.column_int(0));
    }

    std::vector<std::pair<const corpus::Chunk*, providers::EmbeddingVector>> embedded;
    std::vector<std::string> failed;
    for (std::size_t start = 0; start < chunks.size(); start += batch_size) {
        auto end = std::min(chunks.size(), start + batch_size);
        std::vector<std::string> texts;
        for (auto i = start; i < end; ++i) texts.push_back(chunks[i].text);
        try {
            auto vectors = providers::embed_texts(texts, embedder);
            for (auto i = start; i < end; ++i) embedded.emplace_back(&chunks[i], std::move(vectors[i - start]));
        } catch (const ProviderError&) {
            // Isolate the failing chunks of this batch.
            for (auto i = start; i < end; ++i) {
                try {
                    auto v = providers::embed_texts({chunks[i].text}, embedder);
                    embedded.emplace_back(&chunks[i], std::move(v.front()));
                } catch (const ProviderError& e) {
                    spdlog::error("embedding chunk {} failed after {} attempt(s): {}", chunks[i].chunk_id,
                                  e.attempts(), e.what());
                    failed.push_back(chunks[i].chunk_id);
                }
            }
        }
    }

    for (const auto& [chunk, v] : embedded) {
        if (!dim) dim = v.dim();
        if (v.dim() != *dim) {
            throw InvariantError("chunk " + chunk->chunk_id + " embedded with dim " + std::to_string(v.dim()) +
                                 ", index dim is " + std::to_string(*dim));
        }
    }

    {
        db::Transaction tx(db_);
        auto upsert = db_.prepare(
            "INSERT INTO vectors(chunk_id, model_id, dim, vector) VALUES (?1, ?2, ?3, ?4) "
            "ON CONFLICT(chunk_id) DO UPDATE SET model_id = excluded.model_id, dim = excluded.dim, "
            "vector = excluded.vector");
        for (const auto& [chunk, v] : embedded) {
            upsert.bind(1, chunk->chunk_id)
                .bind(2, v.model_id)
                .bind(3, static_cast<std::int64_t>(v.dim()))
                .bind_blob(4, providers::encode_vector(v.values))
                .run();
        }
        tx.commit();
    }
    reload();

    auto total = static_cast<std::size_t>(db_.scalar("SELECT COUNT(*) FROM vectors"));
    if (!failed.empty()) throw PartialIndexError(std::move(failed), total);
    return total;
}

void VectorIndex::reload() {
    auto fresh = std::make_shared<Snapshot>();
    auto s = db_.prepare(
        "SELECT v.chunk_id, v.model_id, v.vector, c.doi, c.member_pids, c.text "
        "FROM vectors v JOIN chunks c ON c.chunk_id = v.chunk_id ORDER BY v.chunk_id");
    while (s.step()) {
        IndexEntry e;
        e.chunk_id = s.column_text(0);
        e.vector.model_id = s.column_text(1);
        e.vector.values = providers::decode_vector(s.column_blob(2));
        e.vector.zero = std::all_of(e.vector.values.begin(), e.vector.values.end(), [](float x) { return x == 0.0f; });
        e.doi = s.column_text(3);
        e.member_pids = nlohmann::json::parse(s.column_text(4)).get<std::vector<std::string>>();
        e.text = s.column_text(5);
        fresh->push_back(std::move(e));
    }
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(fresh);
}

std::shared_ptr<const VectorIndex::Snapshot> VectorIndex::snapshot() {
    {
        std::lock_guard lock(mutex_);
        if (snapshot_) return snapshot_;
    }
    reload();
    std::lock_guard lock(mutex_);
    return snapshot_;
}

std::size_t VectorIndex::size() { return snapshot()->size(); }

std::vector<RankedChunk> VectorIndex::rank(const providers::EmbeddingVector& query, std::size_t k) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    auto snap = snapshot();
    if (snap->empty()) throw EmptyIndexError();

    std::vector<std::pair<double, const IndexEntry*>> scored;
    scored.reserve(snap->size());
    for (const auto& e : *snap) scored.emplace_back(providers::cosine(query, e.vector), &e);

    auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [](const auto& a, const auto& b) {
                          return ranks_before(a.first, a.second->chunk_id, b.first, b.second->chunk_id);
                      });

    std::vector<RankedChunk> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto* e = scored[i].second;
        out.push_back({e->chunk_id, scored[i].first, static_cast<int>(i + 1), e->doi, e->member_pids, e->text});
    }
    return out;
}

std::vector<RankedChunk> VectorIndex::retrieve_topk(const std::string& query, std::size_t k,
                                                    providers::Embedder& embedder) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    if (snapshot()->empty()) throw EmptyIndexError();
    auto q = providers::embed_texts({query}, embedder);
    return rank(q.front(), k);
}

}  // namespace scholar::vector
