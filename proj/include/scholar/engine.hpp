#pragma once

#include "scholar/answer.hpp"
#include "scholar/canonicalizer.hpp"
#include "scholar/config.hpp"
#include "scholar/corpus.hpp"
#include "scholar/db.hpp"
#include "scholar/eval.hpp"
#include "scholar/graph_retriever.hpp"
#include "scholar/kg.hpp"
#include "scholar/query.hpp"
#include "scholar/vector_index.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace scholar {

enum class Pipeline { vector, graph };

std::string_view to_string(Pipeline p);
/// Throws PreconditionError for anything but "vector" or "graph".
Pipeline pipeline_from_string(std::string_view s);

struct QueryOptions {
    std::optional<std::size_t> k;           // vector pipeline only
    std::optional<std::size_t> max_tuples;  // graph pipeline only
    std::optional<std::string> generate_model;
};

struct QueryOutcome {
    Pipeline pipeline = Pipeline::vector;
    std::string question;
    std::vector<std::string> keywords;  // graph pipeline
    answer::Answer answer;
    answer::EvidenceSet evidence;
    answer::CitationReport citation_report;
    /// Ranked, deduplicated provenance paragraphs and their papers.
    std::vector<std::string> retrieved_pids;
    std::vector<std::string> retrieved_dois;
    /// Start of each retrieved chunk in retrieved_pids (vector pipeline).
    std::vector<std::size_t> context_starts;
    std::optional<graph::Subgraph> subgraph;
    bool rerank_skipped = false;
    std::vector<std::string> diagnostics;
    double retrieval_seconds = 0.0;
    double total_seconds = 0.0;
};

struct EvidenceDetail {
    answer::EvidenceKind kind = answer::EvidenceKind::chunk;
    std::string ref;
    std::optional<corpus::Chunk> chunk;
    std::optional<kg::KgTuple> tuple;
    /// Member paragraphs of a chunk, or the source paragraph of a tuple.
    std::vector<corpus::Paragraph> paragraphs;
};

struct StoreStats {
    std::size_t documents = 0;
    std::size_t paragraphs = 0;
    std::size_t chunks = 0;
    std::size_t vectors = 0;
    std::size_t tuples = 0;
    std::size_t entities = 0;
    std::size_t canonicals = 0;
    std::size_t feedback = 0;
    std::vector<canon::ClusterSize> top_clusters;

    /// "empty" without documents, "ready" when vectors, tuples and canonical
    /// entities exist, "partial" otherwise.
    std::string status() const;
};

using PhaseProgress = std::function<void(const std::string& phase, std::size_t done, std::size_t total)>;

/// Both retrieval pipelines over one store file. Queries may run
/// concurrently; builds write through their own connection and publish new
/// read snapshots when they commit.
class Engine {
public:
    explicit Engine(EngineConfig config);
    ~Engine();

    const EngineConfig& config() const { return config_; }

    corpus::IngestSummary ingest(const std::vector<corpus::Document>& docs, const std::vector<std::string>& keywords,
                                 const PhaseProgress& progress = {});
    corpus::IngestSummary ingest_file(const std::string& corpus_path, const std::string& keywords_path = "",
                                      const PhaseProgress& progress = {});
    /// Embeds every stored chunk. Returns the index size.
    std::size_t index_vectors(const PhaseProgress& progress = {});
    kg::BuildSummary build_kg(const PhaseProgress& progress = {});
    canon::CanonicalizeSummary canonicalize(const PhaseProgress& progress = {});

    QueryOutcome query(Pipeline pipeline, const std::string& question, const QueryOptions& options = {});
    QueryOutcome query_vector(const std::string& question, std::size_t k,
                              const std::optional<std::string>& generate_model = std::nullopt);
    QueryOutcome query_graph(const std::string& question, std::size_t max_tuples,
                             const std::optional<std::string>& generate_model = std::nullopt);

    /// Adapter for the evaluation harness.
    eval::PipelineFn eval_runner(Pipeline pipeline, const QueryOptions& options = {});

    /// Throws NotFoundError for unknown or stale refs.
    EvidenceDetail evidence(const std::string& ref);

    StoreStats stats(std::size_t top_clusters = 10);

    /// Re-reads committed store contents into the query snapshots.
    void refresh();

    db::Database& database() { return db_; }

private:
    std::shared_ptr<const graph::GraphSnapshot> graph_snapshot();
    providers::Generator& generator_for(const std::optional<std::string>& model, std::unique_ptr<providers::Generator>& owned);
    answer::Answer answer_with(const std::string& question, const answer::EvidenceSet& evidence,
                               providers::Generator& generator);

    EngineConfig config_;
    db::Database db_;
    vector::VectorIndex index_;
    query::Lexicon lexicon_;
    PromptTemplate answer_prompt_;
    PromptTemplate extraction_prompt_;
    std::unique_ptr<providers::Embedder> embedder_;
    std::unique_ptr<providers::Embedder> entity_embedder_;
    std::unique_ptr<providers::Generator> generator_;
    std::unique_ptr<providers::Generator> extractor_;
    std::unique_ptr<providers::CrossScorer> cross_scorer_;

    std::mutex snapshot_mutex_;
    std::shared_ptr<const graph::GraphSnapshot> graph_;
};

}  // namespace scholar
