#pragma once

#include "scholar/corpus.hpp"
#include "scholar/db.hpp"
#include "scholar/prompt_template.hpp"
#include "scholar/providers.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace scholar::kg {

/// Five-field relational fact with provenance.
struct KgTuple {
    std::string tuple_id;  // "<source_pid>#t<n>"
    std::string subject;
    std::string relation;
    std::string object;
    std::string reference_relation;  // optional, stored verbatim
    std::string reference_node;      // optional, stored verbatim
    std::string source_pid;
    std::string source_doi;
    std::vector<std::string> citation_markers;

    bool operator==(const KgTuple&) const = default;
};

/// Throws InvariantError when subject, relation or object is blank or ids are missing.
void validate(const KgTuple& t);

/// "subject relation object" plus the reference fields when present.
std::string render_path(const KgTuple& t);

struct TupleFields {
    std::string subject;
    std::string relation;
    std::string object;
    std::string reference_relation;
    std::string reference_node;
};

/// Result of parsing the line-oriented extraction format
/// "subject|relation|object|reference_relation|reference_node".
struct ParsedExtraction {
    std::vector<TupleFields> tuples;
    std::size_t malformed_lines = 0;
    /// Non-empty response without a single valid line.
    bool unparseable() const { return tuples.empty() && malformed_lines > 0; }
};

/// Strict parser: a line must have exactly five '|' separated fields with
/// non-blank subject, relation and object. Anything else is counted, never repaired.
/// A blank response or a lone "NONE" means no facts.
ParsedExtraction parse_extraction(std::string_view response);

/// Figure, table and bracketed citation references found in a text.
std::vector<std::string> find_citation_markers(std::string_view text);

struct ExtractionDiagnostic {
    std::string pid;
    int attempts = 0;
    std::size_t malformed_lines = 0;
    std::string message;
};

struct ExtractionOutcome {
    std::vector<KgTuple> tuples;
    std::size_t malformed_lines = 0;
    /// Present when the provider failed or never produced a parseable reply.
    std::optional<ExtractionDiagnostic> diagnostic;
};

/// The embedded default extraction prompt (requires {paragraph}).
PromptTemplate default_extraction_template();

/// One provider call per paragraph (re-asked while the reply is unparseable,
/// up to `max_attempts`). Never throws for provider trouble: failures come
/// back as an empty tuple list plus a diagnostic.
ExtractionOutcome extract_tuples(const corpus::Paragraph& paragraph, providers::Generator& generator,
                                 const PromptTemplate& prompt, int max_attempts = 3);

/// Sentence splitter used by the stub extractor: breaks after '.', '!' or '?'
/// followed by whitespace or end of text.
std::vector<std::string> split_sentences(std::string_view text);

struct ExtractionRule {
    std::regex pattern;
    std::string pattern_source;
    std::string tuple_template;  // five-field line with $1..$9 captures
};

/// Parses "<regex> TAB <template>" lines ('#' comments). Throws ConfigError.
std::vector<ExtractionRule> parse_rules(std::string_view content);
/// The embedded default rule table (data/stub_rules.tsv).
std::vector<ExtractionRule> default_rules();

/// Offline extraction provider. It reads the paragraph between
/// <paragraph> ... </paragraph> in the prompt (or the whole prompt), applies
/// the first matching rule to each sentence and answers in the extraction
/// line format, or "NONE".
class StubExtractionGenerator final : public providers::Generator {
public:
    StubExtractionGenerator(providers::ProviderConfig cfg, std::vector<ExtractionRule> rules);

    providers::GenerationResult generate(const std::string& prompt) override;
    const providers::ProviderConfig& config() const override { return cfg_; }

private:
    providers::ProviderConfig cfg_;
    std::vector<ExtractionRule> rules_;
};

struct CorpusStats {
    std::size_t tuple_count = 0;
    /// Distinct surface forms over subjects and objects.
    std::size_t entity_count = 0;
    std::map<std::string, std::size_t> per_doi_counts;

    bool operator==(const CorpusStats&) const = default;
};

/// Tuples, citation markers and extraction diagnostics tables.
class TupleStore {
public:
    explicit TupleStore(db::Database& db);

    /// Adds tuples; (subject, relation, object, source_pid) duplicates are stored
    /// once. Returns the store cardinality. The whole batch is rejected on an
    /// invariant violation or an IntegrityError for a dangling source_pid.
    std::size_t store_tuples(const std::vector<KgTuple>& tuples);

    /// Replaces all tuples and diagnostics in one transaction. Canonical tables
    /// are cleared too since they derive from the tuples.
    std::size_t replace_all(const std::vector<KgTuple>& tuples, const std::vector<ExtractionDiagnostic>& diagnostics,
                            const std::string& model_id);

    std::vector<KgTuple> tuples();
    std::optional<KgTuple> tuple(const std::string& tuple_id);
    std::size_t count();
    CorpusStats corpus_stats();
    /// Occurrences of each surface form as subject or object.
    std::map<std::string, std::size_t> entity_frequencies();
    std::vector<ExtractionDiagnostic> diagnostics();

private:
    std::size_t insert_batch(const std::vector<KgTuple>& tuples);

    db::Database& db_;
};

struct BuildSummary {
    std::size_t paragraphs = 0;
    std::size_t tuples_extracted = 0;
    std::size_t tuples_stored = 0;
    std::size_t failed_paragraphs = 0;
    std::size_t malformed_lines = 0;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Extracts tuples from every stored paragraph and replaces the tuple store.
/// `workers` > 1 runs extraction calls concurrently (results stay in
/// paragraph order).
BuildSummary build_kg(db::Database& db, providers::Generator& generator, const PromptTemplate& prompt,
                      int workers = 1, const ProgressFn& progress = {});

}  // namespace scholar::kg
