#include "scholar/canonicalizer.hpp"

#include "scholar/errors.hpp"
#include "scholar/kg.hpp"
#include "scholar/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <thread>

namespace scholar::canon {

namespace {

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (char c : s) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    }
    return n;
}

bool known_unit(std::string_view unit) {
    static const std::set<std::string, std::less<>> kUnits = {
        "k",   "c",   "f",    "kda", "da",  "mpa", "gpa", "kpa", "pa",  "nm",   "um",  "mm",  "cm",   "m",
        "h",   "hr",  "hrs",  "min", "s",   "ms",  "d",   "g",   "mg",  "kg",   "ug",  "ml",  "l",    "mol",
        "mm2", "wt",  "j/g",  "g/l", "rpm", "x",   "ev",  "kj",  "j",   "w",    "v",   "mv",  "ppm",  "g/mol",
        "mg/ml", "kj/mol", "j/gk"};
    return kUnits.contains(text::to_lower(unit));
}

double squared_distance(const std::vector<float>& a, const std::vector<double>& center) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = static_cast<double>(a[i]) - center[i];
        d += diff * diff;
    }
    return d;
}

std::size_t nearest_center(const std::vector<float>& x, const std::vector<std::vector<double>>& centers,
                           double* best_distance = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        double d = squared_distance(x, centers[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_distance) *best_distance = best_d;
    return best;
}

}  // namespace

bool is_numeric_surface(std::string_view surface) {
    auto s = text::trim(surface);
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    auto digit = [&](std::size_t p) { return p < s.size() && std::isdigit(static_cast<unsigned char>(s[p])); };
    std::size_t int_digits = 0, frac_digits = 0;
    while (digit(i)) ++i, ++int_digits;
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (digit(i)) ++i, ++frac_digits;
    }
    if (int_digits + frac_digits == 0) return false;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
        if (digit(j)) {
            i = j;
            while (digit(i)) ++i;
        }
    }
    if (i == s.size()) return true;

    bool separated = std::isspace(static_cast<unsigned char>(s[i])) != 0;
    auto unit = text::trim(s.substr(i));
    if (unit.empty() || utf8_length(unit) > 6) return false;
    for (char c : unit) {
        if (std::isspace(static_cast<unsigned char>(c))) return false;
    }
    if (separated) return true;
    auto lead = static_cast<unsigned char>(unit.front());
    bool symbol = lead == '%' || lead == '/' || lead >= 0x80;  // °, µ and other non-ASCII symbols
    return symbol || known_unit(unit);
}

std::vector<EntityRecord> embed_entities(const std::vector<std::string>& surfaces,
                                         const std::map<std::string, std::size_t>& frequencies,
                                         providers::Embedder& embedder) {
    std::set<std::string> seen;
    for (const auto& s : surfaces) {
        if (!seen.insert(s).second) throw PreconditionError("duplicate entity surface: " + s);
    }
    std::vector<EntityRecord> records;
    if (surfaces.empty()) return records;
    auto vectors = providers::embed_texts(surfaces, embedder);
    records.reserve(surfaces.size());
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        auto it = frequencies.find(surfaces[i]);
        std::size_t freq = it == frequencies.end() ? 1 : std::max<std::size_t>(1, it->second);
        records.push_back({surfaces[i], std::move(vectors[i]), freq});
    }
    return records;
}

std::vector<std::vector<std::size_t>> coarse_cluster(const std::vector<EntityRecord>& records,
                                                     std::size_t n_clusters, const CanonicalizeOptions& options) {
    const std::size_t n = records.size();
    std::vector<std::vector<std::size_t>> out;
    if (n == 0) return out;
    const std::size_t k = std::max<std::size_t>(1, std::min(n_clusters, n));
    if (k == 1) {
        out.emplace_back(n);
        std::iota(out.front().begin(), out.front().end(), std::size_t{0});
        return out;
    }
    if (k == n) {
        for (std::size_t i = 0; i < n; ++i) out.push_back({i});
        return out;
    }

    const std::size_t dim = records.front().vector.dim();
    std::mt19937_64 rng(options.seed);

    // k-means++ seeding
    std::vector<std::vector<double>> centers;
    std::vector<bool> chosen(n, false);
    auto add_center = [&](std::size_t idx) {
        chosen[idx] = true;
        centers.emplace_back(records[idx].vector.values.begin(), records[idx].vector.values.end());
    };
    add_center(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(records[i].vector.values, centers[0]);
    while (centers.size() < k) {
        double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (std::size_t i = 0; i < n; ++i) {
                r -= d2[i];
                if (r <= 0.0 && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                for (std::size_t i = n; i-- > 0;) {
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        add_center(pick);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(records[i].vector.values, centers.back()));
        }
    }

    // mini-batch updates with per-center learning rate 1/count
    std::vector<std::size_t> counts(k, 0);
    std::uniform_int_distribution<std::size_t> sample(0, n - 1);
    const std::size_t batch = std::min(options.batch_size, n);
    std::vector<std::size_t> batch_idx(batch), batch_assign(batch);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        for (std::size_t b = 0; b < batch; ++b) {
            batch_idx[b] = sample(rng);
            batch_assign[b] = nearest_center(records[batch_idx[b]].vector.values, centers);
        }
        for (std::size_t b = 0; b < batch; ++b) {
            auto c = batch_assign[b];
            double eta = 1.0 / static_cast<double>(++counts[c]);
            const auto& x = records[batch_idx[b]].vector.values;
            for (std::size_t j = 0; j < dim; ++j) centers[c][j] = (1.0 - eta) * centers[c][j] + eta * x[j];
        }
    }

    std::vector<std::size_t> assign(n);
    std::vector<double> dist(n);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        assign[i] = nearest_center(records[i].vector.values, centers, &dist[i]);
        ++sizes[assign[i]];
    }

    // Reseed empty clusters from the points farthest from their centers.
    std::vector<bool> moved(n, false);
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] != 0) continue;
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (moved[i] || sizes[assign[i]] < 2) continue;
            if (far == n || dist[i] > dist[far]) far = i;
        }
        if (far == n) break;
        --sizes[assign[far]];
        assign[far] = c;
        sizes[c] = 1;
        moved[far] = true;
        dist[far] = 0.0;
    }

    std::vector<std::vector<std::size_t>> by_cluster(k);
    for (std::size_t i = 0; i < n; ++i) by_cluster[assign[i]].push_back(i);
    for (auto& members : by_cluster) {
        if (!members.empty()) out.push_back(std::move(members));
    }
    return out;
}

std::vector<std::vector<std::size_t>> fine_merge(const std::vector<EntityRecord>& cluster, double distance_threshold) {
    if (cluster.empty()) throw PreconditionError("fine_merge needs a non-empty cluster");
    if (!(distance_threshold > 0.0 && distance_threshold <= 2.0)) {
        throw PreconditionError("distance threshold must be in (0, 2]");
    }
    const std::size_t n = cluster.size();
    std::vector<std::vector<std::size_t>> members(n);
    std::vector<std::string> key(n);
    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        members[i] = {i};
        key[i] = cluster[i].surface;
    }
    if (n == 1) return members;

    std::vector<double> dist(n * n, 0.0);
    auto D = [&](std::size_t i, std::size_t j) -> double& { return dist[i * n + j]; };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = 1.0 - providers::cosine(cluster[i].vector, cluster[j].vector);
            D(i, j) = d;
            D(j, i) = d;
        }
    }

    // (distance, smaller key, larger key): lexicographic order decides merges.
    auto better = [&](std::size_t a1, std::size_t b1, std::size_t a2, std::size_t b2) {
        double d1 = D(a1, b1), d2 = D(a2, b2);
        if (d1 != d2) return d1 < d2;
        auto k1 = std::minmax(key[a1], key[b1]);
        auto k2 = std::minmax(key[a2], key[b2]);
        return k1 < k2;
    };

    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> row_best(n, kNone);
    auto recompute_row = [&](std::size_t r) {
        row_best[r] = kNone;
        for (std::size_t c = 0; c < n; ++c) {
            if (c == r || !active[c]) continue;
            if (row_best[r] == kNone || better(r, c, r, row_best[r])) row_best[r] = c;
        }
    };
    for (std::size_t r = 0; r < n; ++r) recompute_row(r);

    for (std::size_t remaining = n; remaining > 1; --remaining) {
        std::size_t bi = kNone;
        for (std::size_t r = 0; r < n; ++r) {
            if (!active[r] || row_best[r] == kNone) continue;
            if (bi == kNone || better(r, row_best[r], bi, row_best[bi])) bi = r;
        }
        if (bi == kNone) break;
        std::size_t bj = row_best[bi];
        if (D(bi, bj) >= distance_threshold) break;

        // merge bj into bi (Lance-Williams update for average linkage)
        std::size_t keep = bi, drop = bj;
        double ni = static_cast<double>(size[keep]), nj = static_cast<double>(size[drop]);
        for (std::size_t c = 0; c < n; ++c) {
            if (!active[c] || c == keep || c == drop) continue;
            double d = (ni * D(keep, c) + nj * D(drop, c)) / (ni + nj);
            D(keep, c) = d;
            D(c, keep) = d;
        }
        active[drop] = false;
        size[keep] += size[drop];
        members[keep].insert(members[keep].end(), members[drop].begin(), members[drop].end());
        members[drop].clear();
        key[keep] = std::min(key[keep], key[drop]);

        for (std::size_t r = 0; r < n; ++r) {
            if (!active[r]) continue;
            if (r == keep || row_best[r] == keep || row_best[r] == drop) {
                recompute_row(r);
            } else if (better(r, keep, r, row_best[r])) {
                row_best[r] = keep;
            }
        }
    }

    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        std::sort(members[i].begin(), members[i].end());
        out.push_back(std::move(members[i]));
    }
    return out;
}

CanonicalEntity select_canonical(const std::vector<EntityRecord>& sub_cluster, double numeric_fraction) {
    if (sub_cluster.empty()) throw PreconditionError("select_canonical needs a non-empty cluster");
    const std::size_t dim = sub_cluster.front().vector.dim();

    CanonicalEntity entity;
    entity.centroid.model_id = sub_cluster.front().vector.model_id;
    std::vector<double> sum(dim, 0.0);
    for (const auto& r : sub_cluster) {
        if (r.vector.dim() != dim) throw PreconditionError("entity vectors differ in dimension");
        for (std::size_t j = 0; j < dim; ++j) sum[j] += r.vector.values[j];
    }
    entity.centroid.values.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        entity.centroid.values[j] = static_cast<float>(sum[j] / static_cast<double>(sub_cluster.size()));
    }
    providers::normalize(entity.centroid);

    const EntityRecord* best = nullptr;
    double best_cos = -std::numeric_limits<double>::infinity();
    std::size_t numeric = 0;
    for (const auto& r : sub_cluster) {
        entity.members.push_back(r.surface);
        if (is_numeric_surface(r.surface)) ++numeric;
        double c = providers::cosine(r.vector, entity.centroid);
        if (!best || c > best_cos || (c == best_cos && r.surface < best->surface)) {
            best = &r;
            best_cos = c;
        }
    }
    std::sort(entity.members.begin(), entity.members.end());

    double fraction = static_cast<double>(numeric) / static_cast<double>(sub_cluster.size());
    entity.is_numeric_cluster = fraction > numeric_fraction;
    if (entity.is_numeric_cluster) {
        entity.label = std::string(kNumericLabel);
        entity.embedding = entity.centroid;
    } else {
        entity.label = best->surface;
        entity.embedding = best->vector;
    }
    return entity;
}

Canonicalization canonicalize_all(const std::vector<EntityRecord>& input, const CanonicalizeOptions& options) {
    Canonicalization result;
    if (input.empty()) return result;

    std::vector<EntityRecord> records = input;
    std::sort(records.begin(), records.end(),
              [](const EntityRecord& a, const EntityRecord& b) { return a.surface < b.surface; });

    auto coarse = coarse_cluster(records, options.coarse_k, options);

    std::vector<std::vector<CanonicalEntity>> per_cluster(coarse.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (auto c = next.fetch_add(1); c < coarse.size(); c = next.fetch_add(1)) {
            std::vector<EntityRecord> cluster;
            cluster.reserve(coarse[c].size());
            for (auto idx : coarse[c]) cluster.push_back(records[idx]);
            for (const auto& sub : fine_merge(cluster, options.distance_threshold)) {
                std::vector<EntityRecord> members;
                members.reserve(sub.size());
                for (auto idx : sub) members.push_back(cluster[idx]);
                per_cluster[c].push_back(select_canonical(members, options.numeric_fraction));
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int w = 1; w < std::max(1, options.workers); ++w) pool.emplace_back(work);
        work();
    }

    for (auto& list : per_cluster) {
        for (auto& e : list) result.entities.push_back(std::move(e));
    }
    std::sort(result.entities.begin(), result.entities.end(), [](const CanonicalEntity& a, const CanonicalEntity& b) {
        return a.members.front() < b.members.front();
    });
    for (std::size_t i = 0; i < result.entities.size(); ++i) {
        auto& e = result.entities[i];
        e.canonical_id = "canon-" + std::to_string(i);
        for (const auto& m : e.members) result.surface_to_id[m] = e.canonical_id;
    }
    return result;
}

CanonicalStore::CanonicalStore(db::Database& db) : db_(db) { db::ensure_schema(db_); }

void CanonicalStore::save(const Canonicalization& c) {
    db::Transaction tx(db_);
    db_.exec("DELETE FROM canonical_map; DELETE FROM canonical_entities;");
    auto ins = db_.prepare(
        "INSERT INTO canonical_entities(canonical_id, label, member_count, is_numeric, centroid, embedding) "
        "VALUES (?1, ?2, ?3, ?4, ?5, ?6)");
    for (const auto& e : c.entities) {
        ins.bind(1, e.canonical_id)
            .bind(2, e.label)
            .bind(3, static_cast<std::int64_t>(e.members.size()))
            .bind(4, std::int64_t{e.is_numeric_cluster ? 1 : 0})
            .bind_blob(5, providers::encode_vector(e.centroid.values))
            .bind_blob(6, providers::encode_vector(e.embedding.values))
            .run();
    }
    auto map = db_.prepare("INSERT INTO canonical_map(surface, canonical_id) VALUES (?1, ?2)");
    for (const auto& [surface, id] : c.surface_to_id) map.bind(1, surface).bind(2, id).run();
    tx.commit();
}

Canonicalization CanonicalStore::load() {
    Canonicalization c;
    std::map<std::string, std::size_t> index;
    auto s = db_.prepare(
        "SELECT canonical_id, label, is_numeric, centroid, embedding FROM canonical_entities ORDER BY canonical_id");
    while (s.step()) {
        CanonicalEntity e;
        e.canonical_id = s.column_text(0);
        e.label = s.column_text(1);
        e.is_numeric_cluster = s.column_int(2) != 0;
        e.centroid.values = providers::decode_vector(s.column_blob(3));
        e.embedding.values = providers::decode_vector(s.column_blob(4));
        e.centroid.zero = std::all_of(e.centroid.values.begin(), e.centroid.values.end(), [](float x) { return x == 0; });
        e.embedding.zero =
            std::all_of(e.embedding.values.begin(), e.embedding.values.end(), [](float x) { return x == 0; });
        index[e.canonical_id] = c.entities.size();
        c.entities.push_back(std::move(e));
    }
    auto m = db_.prepare("SELECT surface, canonical_id FROM canonical_map ORDER BY surface");
    while (m.step()) {
        auto surface = m.column_text(0);
        auto id = m.column_text(1);
        c.surface_to_id[surface] = id;
        if (auto it = index.find(id); it != index.end()) c.entities[it->second].members.push_back(surface);
    }
    return c;
}

std::size_t CanonicalStore::count() {
    return static_cast<std::size_t>(db_.scalar("SELECT COUNT(*) FROM canonical_entities"));
}

std::vector<ClusterSize> CanonicalStore::cluster_size_ranking(std::size_t top) {
    std::vector<ClusterSize> out;
    auto s = db_.prepare(
        "SELECT canonical_id, label, member_count FROM canonical_entities "
        "ORDER BY member_count DESC, label ASC, canonical_id ASC LIMIT ?1");
    s.bind(1, static_cast<std::int64_t>(top));
    while (s.step()) {
        out.push_back({s.column_text(0), s.column_text(1), static_cast<std::size_t>(s.column_int(2))});
    }
    return out;
}

CanonicalizeSummary run_canonicalization(db::Database& db, providers::Embedder& embedder,
                                         const CanonicalizeOptions& options) {
    kg::TupleStore tuples(db);
    auto frequencies = tuples.entity_frequencies();
    std::vector<std::string> surfaces;
    surfaces.reserve(frequencies.size());
    for (const auto& [surface, count] : frequencies) surfaces.push_back(surface);

    auto records = embed_entities(surfaces, frequencies, embedder);
    auto result = canonicalize_all(records, options);

    CanonicalStore store(db);
    store.save(result);

    CanonicalizeSummary summary;
    summary.entities = records.size();
    summary.canonicals = result.entities.size();
    summary.coarse_clusters = std::min(options.coarse_k, records.size());
    for (const auto& e : result.entities) summary.numeric_clusters += e.is_numeric_cluster ? 1 : 0;
    spdlog::info("canonicalized {} entities into {} canonical nodes", summary.entities, summary.canonicals);
    return summary;
}

}  // namespace scholar::canon
