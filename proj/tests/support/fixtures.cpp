#include "fixtures.hpp"

#include "scholar/providers.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <system_error>

namespace scholar::testing {

namespace {

std::string unique_suffix() {
    static std::mt19937_64 rng{std::random_device{}()};
    return fmt::format("{:016x}", rng());
}

void remove_quietly(const std::filesystem::path& p) {
    std::error_code ec;
    std::filesystem::remove_all(p, ec);
}

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

const std::array<const char*, 12> kFillerWords = {"sample", "film",  "polymer", "measured", "solution", "matrix",
                                                  "batch",  "dried", "reactor", "observed", "surface",  "method"};

std::string filler_sentence(std::mt19937_64& rng) {
    static const std::array<const char*, 8> kTemplates = {
        "The {} was {} under vacuum before the {} was tested.",
        "All {} were prepared in a single {} to limit {} variation.",
        "A {} {} appeared near the {} boundary.",
        "We repeated the {} with a fresh {} and a new {}.",
        "The {} showed no change after the {} treatment of the {}.",
        "Each {} was weighed twice and the {} recorded beside the {}.",
        "Images of the {} reveal a rough {} on the {}.",
        "The {} protocol follows earlier reports on {} and {}.",
    };
    auto pick = [&] { return std::string(kFillerWords[uniform(rng, 0, kFillerWords.size() - 1)]); };
    auto tpl = kTemplates[uniform(rng, 0, kTemplates.size() - 1)];
    return fmt::format(fmt::runtime(tpl), pick(), pick(), pick());
}

std::string filler_paragraph(std::mt19937_64& rng, std::size_t sentences) {
    std::string out;
    for (std::size_t i = 0; i < sentences; ++i) {
        if (!out.empty()) out += " ";
        out += filler_sentence(rng);
    }
    return out;
}

std::string random_paragraph(std::mt19937_64& rng) {
    std::size_t words = uniform(rng, 3, 30);
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        out += random_word(rng, static_cast<int>(uniform(rng, 1, 3)));
        out += uniform(rng, 0, 6) == 0 ? "  \n " : " ";
    }
    return out;
}

const std::array<const char*, 10> kProperties = {
    "tensile strength",     "melting temperature", "glass transition temperature", "elongation at break",
    "water absorption",     "crystallinity",       "storage modulus",              "oxygen permeability",
    "degradation rate",     "impact strength"};

}  // namespace

TempStore::TempStore()
    : path_((std::filesystem::temp_directory_path() / ("scholar-test-" + unique_suffix() + ".db")).string()) {}

TempStore::~TempStore() {
    for (const char* suffix : {"", "-wal", "-shm", "-journal"}) remove_quietly(path_ + suffix);
}

TempDir::TempDir() : path_(std::filesystem::temp_directory_path() / ("scholar-dir-" + unique_suffix())) {
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() { remove_quietly(path_); }

EngineConfig local_config(const std::string& store_path) {
    EngineConfig cfg;
    cfg.store_path = store_path;
    cfg.workers = 2;
    cfg.retry.initial_backoff = std::chrono::milliseconds(1);
    return cfg;
}

std::string random_word(std::mt19937_64& rng, int syllables) {
    static constexpr std::string_view kConsonants = "bdfgklmnprtvz";
    static constexpr std::string_view kVowels = "aeiou";
    std::string w;
    for (int i = 0; i < syllables; ++i) {
        w.push_back(kConsonants[uniform(rng, 0, kConsonants.size() - 1)]);
        w.push_back(kVowels[uniform(rng, 0, kVowels.size() - 1)]);
    }
    return w;
}

corpus::Document random_document(std::mt19937_64& rng, const std::string& doi) {
    static const std::array<const char*, 5> kHeadings = {"Introduction", "Methods", "Results", "Discussion",
                                                         "Samples"};
    auto heading = [&] { return std::string(kHeadings[uniform(rng, 0, kHeadings.size() - 1)]); };
    auto paragraphs = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::string> out;
        for (std::size_t i = uniform(rng, lo, hi); i > 0; --i) {
            out.push_back(uniform(rng, 0, 7) == 0 ? std::string("  \n ") : random_paragraph(rng));
        }
        return out;
    };

    corpus::Document doc;
    doc.doi = doi;
    doc.title = "Synthetic record " + random_word(rng, 3);
    doc.abstract_text = random_paragraph(rng);
    for (std::size_t t = uniform(rng, 1, 4); t > 0; --t) {
        corpus::Section top{heading(), 1, paragraphs(0, 3), {}};
        for (std::size_t s = uniform(rng, 0, 3); s > 0; --s) {
            // Every first-level subsection opens with a non-blank paragraph so
            // adjacent subsections that share a heading remain distinguishable.
            corpus::Section sub{heading(), 2, paragraphs(0, 3), {}};
            sub.paragraphs.insert(sub.paragraphs.begin(), random_paragraph(rng));
            for (std::size_t d = uniform(rng, 0, 2); d > 0; --d) {
                sub.subsections.push_back({heading(), static_cast<int>(uniform(rng, 3, 4)), paragraphs(0, 3), {}});
            }
            top.subsections.push_back(std::move(sub));
        }
        doc.sections.push_back(std::move(top));
    }
    return doc;
}

std::size_t count_paragraphs(const corpus::Document& doc) {
    std::size_t n = 0;
    auto visit = [&](const corpus::Section& s, auto&& self) -> void {
        for (const auto& p : s.paragraphs) {
            if (std::any_of(p.begin(), p.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); })) {
                ++n;
            }
        }
        for (const auto& c : s.subsections) self(c, self);
    };
    for (const auto& s : doc.sections) visit(s, visit);
    return n;
}

PlantedCorpus make_planted_corpus(std::size_t documents, std::size_t facts_per_document, std::size_t unanswerable,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::set<std::string> used;
    auto fresh_entity = [&] {
        for (;;) {
            auto w = random_word(rng, 4);
            if (used.insert(w).second) return w;
        }
    };

    PlantedCorpus out;
    for (std::size_t d = 0; d < documents; ++d) {
        corpus::Document doc;
        doc.doi = fmt::format("10.5555/synth.{:03}", d);
        doc.title = fmt::format("Biodegradable polymer study {}", d);
        doc.abstract_text = filler_paragraph(rng, 2);

        // seq counter mirrors the extractor: one pid per non-blank paragraph in document order
        int seq = 0;
        corpus::Section intro{"Introduction", 1, {filler_paragraph(rng, 2), filler_paragraph(rng, 3)}, {}};
        seq += 2;
        corpus::Section results{"Results", 1, {}, {}};
        for (std::size_t f = 0; f < facts_per_document; ++f) {
            PlantedFact fact;
            fact.entity = fresh_entity();
            fact.property = kProperties[uniform(rng, 0, kProperties.size() - 1)];
            fact.value = fmt::format("{}.{}", uniform(rng, 1, 500), uniform(rng, 0, 9));
            fact.doi = doc.doi;
            fact.pid = fmt::format("{}#p{}", doc.doi, seq);
            std::string sentence = fmt::format("{} has a {} of ANSWER[{}]:{}.", capitalize(fact.entity),
                                               fact.property, fact.entity, fact.value);
            // The companion paragraph names the entity again, as a subsection
            // about one material would.
            std::string companion = fmt::format("Films of {0} were cast from solution and dried overnight. "
                                                "The {0} samples were stored at room temperature.",
                                                fact.entity);
            corpus::Section sub{fmt::format("Sample {}", f + 1), 2,
                                {sentence + " Measurements were repeated three times.", companion},
                                {}};
            seq += 2;
            results.subsections.push_back(std::move(sub));
            out.facts.push_back(std::move(fact));
        }
        corpus::Section closing{"Conclusions", 1, {filler_paragraph(rng, 2)}, {}};
        seq += 1;
        doc.sections = {std::move(intro), std::move(results), std::move(closing)};
        out.docs.push_back(std::move(doc));
    }

    for (std::size_t i = 0; i < out.facts.size(); ++i) {
        const auto& f = out.facts[i];
        out.questions.push_back({fmt::format("p{:03}", i), fmt::format("What is the {} of {}?", f.property, f.entity),
                                 f.pid, f.doi});
    }
    for (std::size_t i = 0; i < unanswerable; ++i) {
        auto property = kProperties[uniform(rng, 0, kProperties.size() - 1)];
        out.unanswerable.push_back(
            {fmt::format("u{:03}", i), fmt::format("What is the {} of {}?", property, fresh_entity()), "", ""});
    }
    return out;
}

providers::EmbeddingVector unit_vector(std::vector<float> values) {
    providers::EmbeddingVector v;
    v.values = std::move(values);
    v.model_id = "fixture";
    providers::normalize(v);
    return v;
}

EntityFixture make_entity_fixture(std::mt19937_64& rng, std::size_t max_entities, std::size_t dim) {
    EntityFixture fx;
    std::set<std::string> used;
    std::size_t groups = uniform(rng, 2, std::min<std::size_t>(8, dim));
    std::vector<std::size_t> axes(dim);
    for (std::size_t i = 0; i < dim; ++i) axes[i] = i;
    std::shuffle(axes.begin(), axes.end(), rng);

    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t budget = max_entities;
    for (std::size_t g = 0; g < groups && budget > 0; ++g) {
        std::size_t members = std::min(budget, uniform(rng, 1, max_entities / groups));
        budget -= members;
        // Tight groups are near-duplicates; loose groups put pairwise distances
        // around the threshold so merge order matters.
        double spread = uniform(rng, 0, 2) == 0 ? 0.45 : 0.05;
        bool numeric_group = uniform(rng, 0, 3) == 0;
        std::vector<std::string> surfaces;
        for (std::size_t m = 0; m < members; ++m) {
            std::string surface;
            do {
                surface = numeric_group && uniform(rng, 0, 4) != 0
                              ? fmt::format("{} MPa", uniform(rng, 1, 9999))
                              : random_word(rng, static_cast<int>(uniform(rng, 2, 4)));
            } while (!used.insert(surface).second);
            std::vector<float> v(dim, 0.0f);
            v[axes[g]] = 1.0f;
            for (std::size_t j = 0; j < dim; ++j) {
                if (j == axes[g] || std::find(axes.begin(), axes.begin() + groups, j) != axes.begin() + groups) {
                    continue;
                }
                v[j] += static_cast<float>(spread * noise(rng) / std::sqrt(static_cast<double>(dim)));
            }
            v[axes[g]] += static_cast<float>(0.01 * noise(rng));
            fx.records.push_back({surface, unit_vector(std::move(v)), 1});
            surfaces.push_back(surface);
        }
        std::sort(surfaces.begin(), surfaces.end());
        fx.planted_groups.push_back(std::move(surfaces));
    }
    std::shuffle(fx.records.begin(), fx.records.end(), rng);
    return fx;
}

}  // namespace scholar::testing
