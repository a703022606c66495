#pragma once

#include "scholar/canonicalizer.hpp"
#include "scholar/config.hpp"
#include "scholar/corpus.hpp"
#include "scholar/eval.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace scholar::testing {

/// Fresh SQLite path under the temp directory; the file and its WAL/SHM
/// companions are removed on destruction.
class TempStore {
public:
    TempStore();
    ~TempStore();
    TempStore(const TempStore&) = delete;
    TempStore& operator=(const TempStore&) = delete;

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

/// Engine config with local providers and the given store.
EngineConfig local_config(const std::string& store_path);

/// Random lowercase pseudo-word built from consonant-vowel syllables.
std::string random_word(std::mt19937_64& rng, int syllables);

/// Random article: 1-4 top-level sections, each with 0-3 direct paragraphs
/// and 0-3 subsections that may nest one more level. Some paragraphs are
/// blank and must be skipped by the extractor.
corpus::Document random_document(std::mt19937_64& rng, const std::string& doi);

/// Number of non-blank paragraphs in a document tree.
std::size_t count_paragraphs(const corpus::Document& doc);

struct PlantedFact {
    std::string entity;    // unique per fact
    std::string property;  // e.g. "tensile strength"
    std::string value;
    std::string pid;
    std::string doi;
};

/// Synthetic corpus in which every fact sits in its own first-level
/// subsection as "<Entity> has a <property> of ANSWER[<entity>]:<value>.",
/// followed by a paragraph about the same entity; introduction and
/// conclusion sections hold filler text. Questions ask for one property of one
/// entity; unanswerable questions name entities absent from the corpus.
struct PlantedCorpus {
    std::vector<corpus::Document> docs;
    std::vector<PlantedFact> facts;
    std::vector<eval::EvalQuestion> questions;
    std::vector<eval::EvalQuestion> unanswerable;
};

PlantedCorpus make_planted_corpus(std::size_t documents, std::size_t facts_per_document,
                                  std::size_t unanswerable, std::uint64_t seed);

/// Entity fixture for the canonicalizer: groups of near-duplicate unit
/// vectors around mutually orthogonal directions.
struct EntityFixture {
    std::vector<canon::EntityRecord> records;
    std::vector<std::vector<std::string>> planted_groups;
};

EntityFixture make_entity_fixture(std::mt19937_64& rng, std::size_t max_entities, std::size_t dim);

/// Unit vector with the given raw values (zero flag set for an all-zero input).
providers::EmbeddingVector unit_vector(std::vector<float> values);

}  // namespace scholar::testing
