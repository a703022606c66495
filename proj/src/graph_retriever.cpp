#include "scholar/graph_retriever.hpp"

#include "scholar/errors.hpp"
#include "scholar/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

namespace scholar::graph {

namespace {

bool ranks_before(const ScoredTuple& a, const ScoredTuple& b, double sa, double sb, const GraphSnapshot& snapshot) {
    if (sa != sb) return sa > sb;
    return snapshot.tuples[a.index].tuple_id < snapshot.tuples[b.index].tuple_id;
}

// Min-max normalization in place; equal values all become 1.0.
void min_max(std::vector<double>& values) {
    if (values.empty()) return;
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    double min = *lo, max = *hi;
    for (auto& v : values) v = max > min ? (v - min) / (max - min) : 1.0;
}

}  // namespace

void RetrievalParams::validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(alpha) || !unit(tau) || !unit(lambda)) {
        throw PreconditionError("alpha, tau and lambda must lie in [0, 1]");
    }
    if (max_tuples == 0) throw PreconditionError("max_tuples must be at least 1");
    if (rerank_pool_factor == 0) throw PreconditionError("rerank pool factor must be at least 1");
    if (canonical_sim_threshold < -1.0 || canonical_sim_threshold > 1.0) {
        throw PreconditionError("canonical similarity threshold must lie in [-1, 1]");
    }
}

std::shared_ptr<const GraphSnapshot> GraphSnapshot::load(db::Database& db) {
    kg::TupleStore tuples(db);
    canon::CanonicalStore canonical(db);
    // One read transaction so tuples and canonical tables come from the same commit.
    db.exec("BEGIN");
    try {
        auto snap = from(tuples.tuples(), canonical.load());
        db.exec("COMMIT");
        return snap;
    } catch (...) {
        db.exec("ROLLBACK");
        throw;
    }
}

std::shared_ptr<const GraphSnapshot> GraphSnapshot::from(std::vector<kg::KgTuple> tuples, canon::Canonicalization c) {
    auto snap = std::make_shared<GraphSnapshot>();
    snap->tuples = std::move(tuples);
    snap->canonical = std::move(c);
    for (std::size_t i = 0; i < snap->canonical.entities.size(); ++i) {
        snap->canonical_index[snap->canonical.entities[i].canonical_id] = i;
    }
    return snap;
}

std::map<std::size_t, double> string_retrieve(const std::vector<std::string>& keywords,
                                              const std::vector<kg::KgTuple>& tuples) {
    std::map<std::size_t, double> out;
    if (keywords.empty()) return out;
    std::map<std::size_t, std::size_t> matched;
    for (std::size_t i = 0; i < tuples.size(); ++i) {
        const auto& t = tuples[i];
        std::size_t m = 0;
        for (const auto& kw : keywords) {
            if (text::contains_word(t.subject, kw) || text::contains_word(t.relation, kw) ||
                text::contains_word(t.object, kw)) {
                ++m;
            }
        }
        if (m > 0) matched[i] = m;
    }
    const double total = static_cast<double>(keywords.size());
    for (const auto& [i, m] : matched) {
        if (m == keywords.size()) out[i] = 1.0;
    }
    if (!out.empty()) return out;
    for (const auto& [i, m] : matched) {
        if (m >= 2) out[i] = static_cast<double>(m) / total;
    }
    return out;
}

std::map<std::string, double> match_canonicals(const std::vector<providers::EmbeddingVector>& keyword_vectors,
                                               const canon::Canonicalization& canonical, double threshold) {
    std::map<std::string, double> out;
    for (const auto& entity : canonical.entities) {
        double best = -1.0;
        bool any = false;
        for (const auto& kv : keyword_vectors) {
            if (kv.dim() != entity.embedding.dim()) continue;
            double sim = providers::cosine(kv, entity.embedding);
            if (sim > threshold && sim > best) {
                best = sim;
                any = true;
            }
        }
        if (any) out[entity.canonical_id] = best;
    }
    return out;
}

std::map<std::size_t, double> canonical_retrieve(const std::map<std::string, double>& matched,
                                                 const GraphSnapshot& snapshot) {
    std::map<std::size_t, double> out;
    if (matched.empty()) return out;
    const auto& surface_to_id = snapshot.canonical.surface_to_id;
    auto score_of = [&](const std::string& surface) -> double {
        auto it = surface_to_id.find(surface);
        if (it == surface_to_id.end()) return -1.0;
        auto m = matched.find(it->second);
        return m == matched.end() ? -1.0 : m->second;
    };
    for (std::size_t i = 0; i < snapshot.tuples.size(); ++i) {
        double s = std::max(score_of(snapshot.tuples[i].subject), score_of(snapshot.tuples[i].object));
        if (s > -1.0) out[i] = s;
    }
    return out;
}

std::vector<ScoredTuple> hybrid_fuse(const std::map<std::size_t, double>& string_scores,
                                     const std::map<std::size_t, double>& canonical_scores, double alpha, double tau,
                                     const GraphSnapshot& snapshot) {
    std::map<std::size_t, ScoredTuple> merged;
    for (const auto& [i, s] : string_scores) {
        merged[i].index = i;
        merged[i].s_string = s;
    }
    for (const auto& [i, s] : canonical_scores) {
        merged[i].index = i;
        merged[i].s_canonical = s;
    }
    std::vector<ScoredTuple> all;
    std::vector<double> raw;
    for (auto& [i, st] : merged) {
        raw.push_back(alpha * st.s_canonical + (1.0 - alpha) * st.s_string);
        all.push_back(st);
    }
    min_max(raw);
    std::vector<ScoredTuple> out;
    for (std::size_t j = 0; j < all.size(); ++j) {
        if (raw[j] < tau) continue;
        all[j].s_hybrid = raw[j];
        out.push_back(all[j]);
    }
    std::sort(out.begin(), out.end(), [&](const ScoredTuple& a, const ScoredTuple& b) {
        return ranks_before(a, b, a.s_hybrid, b.s_hybrid, snapshot);
    });
    return out;
}

RerankOutcome path_rerank(const std::string& query, std::vector<ScoredTuple> candidates,
                          providers::CrossScorer& scorer, const RetrievalParams& params,
                          const GraphSnapshot& snapshot) {
    RerankOutcome outcome;
    std::sort(candidates.begin(), candidates.end(), [&](const ScoredTuple& a, const ScoredTuple& b) {
        return ranks_before(a, b, a.s_hybrid, b.s_hybrid, snapshot);
    });
    const std::size_t pool = params.rerank_pool_factor * params.max_tuples;
    if (candidates.size() > pool) candidates.resize(pool);
    if (candidates.empty()) {
        outcome.tuples = std::move(candidates);
        return outcome;
    }

    std::vector<std::string> paths;
    paths.reserve(candidates.size());
    for (const auto& c : candidates) paths.push_back(kg::render_path(snapshot.tuples[c.index]));

    try {
        auto scores = providers::cross_score(query, paths, scorer);
        min_max(scores);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            candidates[i].s_rerank = scores[i];
            candidates[i].s_final = params.lambda * scores[i] + (1.0 - params.lambda) * candidates[i].s_hybrid;
        }
    } catch (const ProviderError& e) {
        spdlog::warn("path rerank skipped: {}", e.what());
        outcome.rerank_skipped = true;
        outcome.diagnostic = std::string("rerank skipped: ") + e.what();
        for (auto& c : candidates) {
            c.s_rerank = 0.0;
            c.s_final = c.s_hybrid;
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](const ScoredTuple& a, const ScoredTuple& b) {
        return ranks_before(a, b, a.s_final, b.s_final, snapshot);
    });
    if (candidates.size() > params.max_tuples) candidates.resize(params.max_tuples);
    outcome.tuples = std::move(candidates);
    return outcome;
}

Subgraph assemble_subgraph(const std::vector<ScoredTuple>& tuples, const GraphSnapshot& snapshot) {
    Subgraph g;
    std::set<std::string> seen;
    auto node_for = [&](const std::string& surface) {
        std::string id, label;
        if (auto it = snapshot.canonical.surface_to_id.find(surface); it != snapshot.canonical.surface_to_id.end()) {
            id = it->second;
            auto e = snapshot.canonical_index.find(id);
            label = e == snapshot.canonical_index.end() ? surface : snapshot.canonical.entities[e->second].label;
        } else {
            id = "surface:" + surface;
            label = surface;
        }
        if (seen.insert(id).second) g.nodes.push_back({id, label});
        return id;
    };
    for (const auto& st : tuples) {
        const auto& t = snapshot.tuples[st.index];
        auto s = node_for(t.subject);
        auto o = node_for(t.object);
        g.edges.push_back({s, o, t.relation, t.tuple_id});
    }
    return g;
}

GraphResult retrieve(const std::string& query, const std::vector<std::string>& keywords,
                     const GraphSnapshot& snapshot, providers::Embedder& embedder, providers::CrossScorer& scorer,
                     const RetrievalParams& params) {
    params.validate();
    if (snapshot.tuples.empty()) throw EmptyIndexError("knowledge graph has no tuples");
    if (keywords.empty()) throw EmptyQueryError("no keywords to retrieve with");

    GraphResult result;
    result.keywords = keywords;

    auto string_scores = string_retrieve(keywords, snapshot.tuples);
    std::map<std::size_t, double> canonical_scores;
    if (snapshot.canonical.entities.empty()) {
        result.diagnostics.push_back("canonical store is empty; string retrieval only");
    } else {
        auto keyword_vectors = providers::embed_texts(keywords, embedder);
        auto matched = match_canonicals(keyword_vectors, snapshot.canonical, params.canonical_sim_threshold);
        result.matched_canonicals = matched.size();
        canonical_scores = canonical_retrieve(matched, snapshot);
    }
    result.string_candidates = string_scores.size();
    result.canonical_candidates = canonical_scores.size();

    auto fused = hybrid_fuse(string_scores, canonical_scores, params.alpha, params.tau, snapshot);
    auto reranked = path_rerank(query, std::move(fused), scorer, params, snapshot);
    result.rerank_skipped = reranked.rerank_skipped;
    if (!reranked.diagnostic.empty()) result.diagnostics.push_back(reranked.diagnostic);
    result.tuples = std::move(reranked.tuples);
    result.subgraph = assemble_subgraph(result.tuples, snapshot);
    return result;
}

}  // namespace scholar::graph
