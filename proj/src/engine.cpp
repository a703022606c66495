#include "scholar/engine.hpp"

#include "scholar/errors.hpp"
#include "scholar/resources.hpp"
#include "scholar/text.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <set>

namespace scholar {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

query::Lexicon make_lexicon(const EngineConfig& c) {
    auto lex = query::Lexicon::defaults();
    if (!c.stopwords_path.empty()) lex.stopwords = query::Lexicon::parse_stopwords(text::read_file(c.stopwords_path));
    if (!c.domain_patterns_path.empty()) {
        lex.domain = query::DomainPatterns::parse(text::read_file(c.domain_patterns_path));
    }
    return lex;
}

std::unique_ptr<providers::Generator> make_extractor(const EngineConfig& c) {
    if (!c.extract.is_local()) return providers::make_generator(c.extract, c.retry);
    auto rules = c.stub_rules_path.empty() ? kg::default_rules() : kg::parse_rules(text::read_file(c.stub_rules_path));
    return std::make_unique<kg::StubExtractionGenerator>(c.extract, std::move(rules));
}

// Ranked provenance: first appearance wins, dois aligned with pids.
void add_provenance(QueryOutcome& out, std::set<std::string>& seen, const std::string& pid, const std::string& doi) {
    if (!seen.insert(pid).second) return;
    out.retrieved_pids.push_back(pid);
    out.retrieved_dois.push_back(doi);
}

}  // namespace

std::string_view to_string(Pipeline p) { return p == Pipeline::vector ? "vector" : "graph"; }

Pipeline pipeline_from_string(std::string_view s) {
    if (s == "vector") return Pipeline::vector;
    if (s == "graph") return Pipeline::graph;
    throw PreconditionError("pipeline must be 'vector' or 'graph', got '" + std::string(s) + "'");
}

std::string StoreStats::status() const {
    if (documents == 0) return "empty";
    if (vectors > 0 && tuples > 0 && canonicals > 0) return "ready";
    return "partial";
}

Engine::Engine(EngineConfig config)
    : config_((config.validate(), std::move(config))),
      db_(config_.store_path),
      index_(db_),
      lexicon_(make_lexicon(config_)),
      answer_prompt_(config_.answer_prompt_path.empty()
                         ? answer::default_answer_template()
                         : PromptTemplate::load(config_.answer_prompt_path, {"evidence", "query"})),
      extraction_prompt_(config_.extraction_prompt_path.empty()
                             ? kg::default_extraction_template()
                             : PromptTemplate::load(config_.extraction_prompt_path, {"paragraph"})),
      embedder_(providers::make_embedder(config_.embed, config_.retry)),
      entity_embedder_(providers::make_embedder(config_.entity_embed, config_.retry)),
      generator_(providers::make_generator(config_.generate, config_.retry, config_.context.abstention)),
      extractor_(make_extractor(config_)),
      cross_scorer_(providers::make_cross_scorer(config_.cross_score, config_.retry)) {
    refresh();
}

Engine::~Engine() = default;

corpus::IngestSummary Engine::ingest(const std::vector<corpus::Document>& docs,
                                     const std::vector<std::string>& keywords, const PhaseProgress& progress) {
    if (progress) progress("ingest", 0, docs.size());
    db::Database writer(config_.store_path);
    auto summary = corpus::ingest(writer, docs, keywords, config_.chunking);
    if (progress) progress("ingest", docs.size(), docs.size());
    refresh();
    return summary;
}

corpus::IngestSummary Engine::ingest_file(const std::string& corpus_path, const std::string& keywords_path,
                                          const PhaseProgress& progress) {
    auto docs = corpus::load_corpus(corpus_path);
    std::vector<std::string> keywords;
    if (!keywords_path.empty()) keywords = corpus::load_keywords(keywords_path);
    return ingest(docs, keywords, progress);
}

std::size_t Engine::index_vectors(const PhaseProgress& progress) {
    db::Database writer(config_.store_path);
    auto chunks = corpus::ParagraphStore(writer).chunks();
    if (progress) progress("embed", 0, chunks.size());
    vector::VectorIndex builder(writer);
    std::size_t size = 0;
    try {
        size = builder.index_chunks(chunks, *embedder_);
    } catch (const PartialIndexError&) {
        refresh();
        throw;
    }
    if (progress) progress("embed", chunks.size(), chunks.size());
    refresh();
    return size;
}

kg::BuildSummary Engine::build_kg(const PhaseProgress& progress) {
    db::Database writer(config_.store_path);
    kg::ProgressFn fn;
    if (progress) fn = [&](std::size_t done, std::size_t total) { progress("extract", done, total); };
    auto summary = kg::build_kg(writer, *extractor_, extraction_prompt_, config_.workers, fn);
    refresh();
    return summary;
}

canon::CanonicalizeSummary Engine::canonicalize(const PhaseProgress& progress) {
    db::Database writer(config_.store_path);
    if (progress) progress("canonicalize", 0, 1);
    auto summary = canon::run_canonicalization(writer, *entity_embedder_, config_.canonicalize);
    if (progress) progress("canonicalize", 1, 1);
    refresh();
    return summary;
}

void Engine::refresh() {
    index_.reload();
    auto snap = graph::GraphSnapshot::load(db_);
    std::lock_guard lock(snapshot_mutex_);
    graph_ = std::move(snap);
}

std::shared_ptr<const graph::GraphSnapshot> Engine::graph_snapshot() {
    std::lock_guard lock(snapshot_mutex_);
    return graph_;
}

providers::Generator& Engine::generator_for(const std::optional<std::string>& model,
                                            std::unique_ptr<providers::Generator>& owned) {
    if (!model || model->empty() || *model == config_.generate.model_id) return *generator_;
    auto cfg = config_.generate;
    cfg.model_id = *model;
    owned = providers::make_generator(cfg, config_.retry, config_.context.abstention);
    return *owned;
}

answer::Answer Engine::answer_with(const std::string& question, const answer::EvidenceSet& evidence,
                                   providers::Generator& generator) {
    return answer::synthesize(question, evidence, generator, answer_prompt_, config_.context);
}

QueryOutcome Engine::query(Pipeline pipeline, const std::string& question, const QueryOptions& options) {
    if (pipeline == Pipeline::vector) {
        if (options.max_tuples) throw PreconditionError("max_tuples applies to the graph pipeline only");
        return query_vector(question, options.k.value_or(config_.k), options.generate_model);
    }
    if (options.k) throw PreconditionError("k applies to the vector pipeline only");
    return query_graph(question, options.max_tuples.value_or(config_.graph.max_tuples), options.generate_model);
}

QueryOutcome Engine::query_vector(const std::string& question, std::size_t k,
                                  const std::optional<std::string>& generate_model) {
    if (text::trim(question).empty()) throw PreconditionError("question is empty");
    if (k < 1 || k > 64) throw PreconditionError("k must lie in [1, 64]");
    auto start = Clock::now();
    QueryOutcome out;
    out.pipeline = Pipeline::vector;
    out.question = question;

    auto ranked = index_.retrieve_topk(question, k, *embedder_);
    out.retrieval_seconds = seconds_since(start);
    std::set<std::string> seen;
    for (const auto& chunk : ranked) {
        out.context_starts.push_back(out.retrieved_pids.size());
        for (const auto& pid : chunk.member_pids) add_provenance(out, seen, pid, chunk.doi);
    }
    out.evidence = answer::evidence_from_chunks(ranked);

    std::unique_ptr<providers::Generator> owned;
    auto& generator = generator_for(generate_model, owned);
    out.answer = answer_with(question, out.evidence, generator);
    out.citation_report = answer::validate_citations(out.answer);
    out.diagnostics = out.answer.diagnostics;
    if (!out.citation_report.ok()) {
        if (generator.config().is_local()) throw InvariantError("local generator produced invalid citations");
        out.diagnostics.push_back("answer has citation violations");
    }
    out.total_seconds = seconds_since(start);
    return out;
}

QueryOutcome Engine::query_graph(const std::string& question, std::size_t max_tuples,
                                 const std::optional<std::string>& generate_model) {
    if (text::trim(question).empty()) throw PreconditionError("question is empty");
    if (max_tuples < 1 || max_tuples > 2000) throw PreconditionError("max_tuples must lie in [1, 2000]");
    auto start = Clock::now();
    QueryOutcome out;
    out.pipeline = Pipeline::graph;
    out.question = question;
    out.keywords = query::preprocess_query(question, lexicon_);

    auto snap = graph_snapshot();
    if (!snap || snap->tuples.empty()) throw EmptyIndexError("knowledge graph is empty; run build-kg first");
    auto params = config_.graph;
    params.max_tuples = max_tuples;
    auto result = graph::retrieve(question, out.keywords, *snap, *entity_embedder_, *cross_scorer_, params);
    out.retrieval_seconds = seconds_since(start);
    out.rerank_skipped = result.rerank_skipped;
    out.subgraph = std::move(result.subgraph);
    out.diagnostics = result.diagnostics;

    std::set<std::string> seen;
    for (const auto& st : result.tuples) {
        const auto& t = snap->tuples[st.index];
        add_provenance(out, seen, t.source_pid, t.source_doi);
    }
    out.evidence = answer::evidence_from_tuples(result.tuples, *snap);

    std::unique_ptr<providers::Generator> owned;
    auto& generator = generator_for(generate_model, owned);
    out.answer = answer_with(question, out.evidence, generator);
    out.citation_report = answer::validate_citations(out.answer);
    out.diagnostics.insert(out.diagnostics.end(), out.answer.diagnostics.begin(), out.answer.diagnostics.end());
    if (!out.citation_report.ok()) {
        if (generator.config().is_local()) throw InvariantError("local generator produced invalid citations");
        out.diagnostics.push_back("answer has citation violations");
    }
    out.total_seconds = seconds_since(start);
    return out;
}

eval::PipelineFn Engine::eval_runner(Pipeline pipeline, const QueryOptions& options) {
    return [this, pipeline, options](const eval::EvalQuestion& q) {
        auto out = query(pipeline, q.question, options);
        if (out.answer.failed) throw ProviderError(out.diagnostics.empty() ? "generation failed" : out.diagnostics.back(),
                                                   false, 1, out.answer.error_tag);
        eval::PipelineRun run;
        run.retrieved_pids = std::move(out.retrieved_pids);
        run.retrieved_dois = std::move(out.retrieved_dois);
        run.context_starts = std::move(out.context_starts);
        run.answer = out.answer.text;
        run.citations = out.answer.citations;
        run.abstained = out.answer.abstained;
        run.latency_seconds = out.total_seconds;
        run.cost_dollars = out.answer.cost;
        return run;
    };
}

EvidenceDetail Engine::evidence(const std::string& ref) {
    auto [kind, id] = answer::parse_ref(ref);
    EvidenceDetail detail;
    detail.kind = kind;
    detail.ref = ref;
    corpus::ParagraphStore paragraphs(db_);
    if (kind == answer::EvidenceKind::chunk) {
        detail.chunk = paragraphs.chunk(id);
        if (!detail.chunk) throw NotFoundError("unknown evidence reference: " + ref);
        for (const auto& pid : detail.chunk->member_pids) {
            if (auto p = paragraphs.paragraph(pid)) detail.paragraphs.push_back(std::move(*p));
        }
    } else {
        detail.tuple = kg::TupleStore(db_).tuple(id);
        if (!detail.tuple) throw NotFoundError("unknown evidence reference: " + ref);
        if (auto p = paragraphs.paragraph(detail.tuple->source_pid)) detail.paragraphs.push_back(std::move(*p));
    }
    return detail;
}

StoreStats Engine::stats(std::size_t top_clusters) {
    StoreStats s;
    auto count = [&](std::string_view sql) { return static_cast<std::size_t>(db_.scalar(sql)); };
    s.documents = count("SELECT COUNT(*) FROM documents");
    s.paragraphs = count("SELECT COUNT(*) FROM paragraphs");
    s.chunks = count("SELECT COUNT(*) FROM chunks");
    s.vectors = count("SELECT COUNT(*) FROM vectors");
    s.tuples = count("SELECT COUNT(*) FROM tuples");
    s.entities = count("SELECT COUNT(*) FROM (SELECT subject FROM tuples UNION SELECT object FROM tuples)");
    s.canonicals = count("SELECT COUNT(*) FROM canonical_entities");
    s.feedback = count("SELECT COUNT(*) FROM feedback");
    s.top_clusters = canon::CanonicalStore(db_).cluster_size_ranking(top_clusters);
    return s;
}

}  // namespace scholar
