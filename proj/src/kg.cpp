#include "scholar/kg.hpp"

#include "scholar/errors.hpp"
#include "scholar/resources.hpp"
#include "scholar/text.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <mutex>
#include <set>
#include <thread>

namespace scholar::kg {

void validate(const KgTuple& t) {
    auto blank = [](const std::string& s) { return text::trim(s).empty(); };
    if (blank(t.subject) || blank(t.relation) || blank(t.object)) {
        throw InvariantError("tuple " + t.tuple_id + ": subject, relation and object must be non-empty");
    }
    if (t.tuple_id.empty()) throw InvariantError("tuple has no id");
    if (t.source_pid.empty() || t.source_doi.empty()) {
        throw InvariantError("tuple " + t.tuple_id + " has no source provenance");
    }
}

std::string render_path(const KgTuple& t) {
    std::string s = t.subject + " " + t.relation + " " + t.object;
    if (!t.reference_relation.empty()) s += " " + t.reference_relation;
    if (!t.reference_node.empty()) s += " " + t.reference_node;
    return s;
}

ParsedExtraction parse_extraction(std::string_view response) {
    ParsedExtraction out;
    auto trimmed = text::trim(response);
    if (trimmed.empty() || text::to_lower(trimmed) == "none") return out;
    for (const auto& raw : text::lines(trimmed)) {
        auto line = text::trim(raw);
        if (line.empty() || text::to_lower(line) == "none") continue;
        auto fields = text::split(line, '|');
        if (fields.size() != 5) {
            ++out.malformed_lines;
            continue;
        }
        TupleFields f{std::string(text::trim(fields[0])), std::string(text::trim(fields[1])),
                      std::string(text::trim(fields[2])), std::string(text::trim(fields[3])),
                      std::string(text::trim(fields[4]))};
        if (f.subject.empty() || f.relation.empty() || f.object.empty()) {
            ++out.malformed_lines;
            continue;
        }
        out.tuples.push_back(std::move(f));
    }
    return out;
}

std::vector<std::string> find_citation_markers(std::string_view source) {
    static const std::regex kMarker(
        R"((?:fig(?:ure)?s?\.?\s*\d+[a-z]?|tables?\s*\d+[a-z]?|\[\d+(?:\s*[,\-]\s*\d+)*\]))", std::regex::icase);
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::string s(source);
    for (std::sregex_iterator it(s.begin(), s.end(), kMarker), end; it != end; ++it) {
        auto m = it->str();
        if (seen.insert(m).second) out.push_back(m);
    }
    return out;
}

PromptTemplate default_extraction_template() {
    return PromptTemplate::parse(resources::get("prompts/extract_v1.txt"), {"paragraph"});
}

ExtractionOutcome extract_tuples(const corpus::Paragraph& paragraph, providers::Generator& generator,
                                 const PromptTemplate& prompt, int max_attempts) {
    if (text::trim(paragraph.text).empty()) {
        throw PreconditionError("paragraph " + paragraph.pid + " has no text");
    }
    ExtractionOutcome outcome;
    const std::string rendered = prompt.render({{"paragraph", paragraph.text}});
    int attempts = 0;
    ParsedExtraction parsed;
    while (attempts < std::max(1, max_attempts)) {
        ++attempts;
        try {
            auto result = providers::generate(rendered, generator);
            parsed = parse_extraction(result.text);
        } catch (const ProviderError& e) {
            outcome.diagnostic = ExtractionDiagnostic{paragraph.pid, attempts + e.attempts() - 1, 0,
                                                      std::string("provider failure: ") + e.what()};
            return outcome;
        }
        outcome.malformed_lines += parsed.malformed_lines;
        if (!parsed.unparseable()) break;
    }
    if (parsed.unparseable()) {
        outcome.diagnostic = ExtractionDiagnostic{paragraph.pid, attempts, outcome.malformed_lines,
                                                  "no parseable tuple line after retries"};
        return outcome;
    }
    if (outcome.malformed_lines > 0) {
        outcome.diagnostic = ExtractionDiagnostic{paragraph.pid, attempts, outcome.malformed_lines,
                                                  "malformed lines dropped"};
    }

    auto markers = find_citation_markers(paragraph.text);
    int n = 0;
    for (auto& f : parsed.tuples) {
        KgTuple t;
        t.tuple_id = paragraph.pid + "#t" + std::to_string(n++);
        t.subject = std::move(f.subject);
        t.relation = std::move(f.relation);
        t.object = std::move(f.object);
        t.reference_relation = std::move(f.reference_relation);
        t.reference_node = std::move(f.reference_node);
        t.source_pid = paragraph.pid;
        t.source_doi = paragraph.doi;
        t.citation_markers = markers;
        outcome.tuples.push_back(std::move(t));
    }
    return outcome;
}

std::vector<std::string> split_sentences(std::string_view source) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < source.size(); ++i) {
        char c = source[i];
        current.push_back(c);
        bool terminal = c == '.' || c == '!' || c == '?';
        bool boundary = i + 1 == source.size() || std::isspace(static_cast<unsigned char>(source[i + 1]));
        if (terminal && boundary) {
            auto s = text::trim(current);
            if (!s.empty()) out.emplace_back(s);
            current.clear();
        }
    }
    auto rest = text::trim(current);
    if (!rest.empty()) out.emplace_back(rest);
    return out;
}

std::vector<ExtractionRule> parse_rules(std::string_view content) {
    std::vector<ExtractionRule> rules;
    for (const auto& line : text::lines(content)) {
        if (text::trim(line).empty() || line.front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ConfigError("rule line without a TAB separator: " + line);
        ExtractionRule r;
        r.pattern_source = line.substr(0, tab);
        r.tuple_template = std::string(text::trim(line.substr(tab + 1)));
        try {
            r.pattern = std::regex(r.pattern_source, std::regex::icase | std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw ConfigError("invalid rule regex '" + r.pattern_source + "': " + e.what());
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

std::vector<ExtractionRule> default_rules() { return parse_rules(resources::get("stub_rules.tsv")); }

StubExtractionGenerator::StubExtractionGenerator(providers::ProviderConfig cfg, std::vector<ExtractionRule> rules)
    : cfg_(std::move(cfg)), rules_(std::move(rules)) {
    if (cfg_.role != providers::Role::generate) throw ConfigError("stub extractor needs a generate-role config");
}

providers::GenerationResult StubExtractionGenerator::generate(const std::string& prompt) {
    auto start = std::chrono::steady_clock::now();
    std::string_view body = prompt;
    auto open = prompt.find("<paragraph>");
    auto close = prompt.rfind("</paragraph>");
    if (open != std::string::npos && close != std::string::npos && close > open) {
        body = std::string_view(prompt).substr(open + 11, close - open - 11);
    }

    std::vector<std::string> out_lines;
    for (auto sentence : split_sentences(body)) {
        while (!sentence.empty() && (sentence.back() == '.' || sentence.back() == '!' || sentence.back() == '?')) {
            sentence.pop_back();
        }
        for (const auto& rule : rules_) {
            std::smatch m;
            if (!std::regex_match(sentence, m, rule.pattern)) continue;
            std::string line;
            const auto& tpl = rule.tuple_template;
            for (std::size_t i = 0; i < tpl.size(); ++i) {
                if (tpl[i] == '$' && i + 1 < tpl.size() && std::isdigit(static_cast<unsigned char>(tpl[i + 1]))) {
                    auto group = static_cast<std::size_t>(tpl[i + 1] - '0');
                    std::string capture = group < m.size() ? m[group].str() : std::string();
                    for (auto& ch : capture) {
                        if (ch == '|') ch = '/';
                    }
                    line += text::trim(capture);
                    ++i;
                } else {
                    line.push_back(tpl[i]);
                }
            }
            out_lines.push_back(std::move(line));
            break;
        }
    }

    providers::GenerationResult r;
    r.text = out_lines.empty() ? "NONE" : text::join(out_lines, "\n");
    r.prompt_tokens = static_cast<std::int64_t>(text::whitespace_token_count(prompt));
    r.completion_tokens = static_cast<std::int64_t>(text::whitespace_token_count(r.text));
    r.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

TupleStore::TupleStore(db::Database& db) : db_(db) { db::ensure_schema(db_); }

std::size_t TupleStore::insert_batch(const std::vector<KgTuple>& tuples) {
    auto has_pid = db_.prepare("SELECT 1 FROM paragraphs WHERE pid = ?1");
    auto insert = db_.prepare(
        "INSERT INTO tuples(tuple_id, subject, relation, object, reference_relation, reference_node, "
        "source_pid, source_doi) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8) ON CONFLICT DO NOTHING");
    auto same_quad = db_.prepare(
        "SELECT 1 FROM tuples WHERE subject = ?1 AND relation = ?2 AND object = ?3 AND source_pid = ?4");
    auto marker = db_.prepare("INSERT INTO tuple_markers(tuple_id, position, marker) VALUES (?1, ?2, ?3)");
    std::size_t inserted = 0;
    for (const auto& t : tuples) {
        validate(t);
        has_pid.bind(1, t.source_pid);
        bool exists = has_pid.step();
        has_pid.reset();
        if (!exists) throw IntegrityError(t.source_pid);

        insert.bind(1, t.tuple_id)
            .bind(2, t.subject)
            .bind(3, t.relation)
            .bind(4, t.object)
            .bind(5, t.reference_relation)
            .bind(6, t.reference_node)
            .bind(7, t.source_pid)
            .bind(8, t.source_doi);
        insert.run();
        if (db_.changes() == 0) {
            same_quad.bind(1, t.subject).bind(2, t.relation).bind(3, t.object).bind(4, t.source_pid);
            bool duplicate = same_quad.step();
            same_quad.reset();
            if (!duplicate) throw InvariantError("tuple id " + t.tuple_id + " is already used by another tuple");
            continue;
        }
        ++inserted;
        for (std::size_t i = 0; i < t.citation_markers.size(); ++i) {
            marker.bind(1, t.tuple_id).bind(2, static_cast<std::int64_t>(i)).bind(3, t.citation_markers[i]).run();
        }
    }
    return inserted;
}

std::size_t TupleStore::store_tuples(const std::vector<KgTuple>& tuples) {
    db::Transaction tx(db_);
    insert_batch(tuples);
    tx.commit();
    return count();
}

std::size_t TupleStore::replace_all(const std::vector<KgTuple>& tuples,
                                    const std::vector<ExtractionDiagnostic>& diagnostics,
                                    const std::string& model_id) {
    db::Transaction tx(db_);
    db_.exec("DELETE FROM canonical_map; DELETE FROM canonical_entities; DELETE FROM tuple_markers; "
             "DELETE FROM tuples; DELETE FROM extraction_diagnostics;");
    insert_batch(tuples);
    auto diag = db_.prepare(
        "INSERT INTO extraction_diagnostics(pid, model_id, attempts, malformed_lines, message) "
        "VALUES (?1, ?2, ?3, ?4, ?5)");
    for (const auto& d : diagnostics) {
        diag.bind(1, d.pid)
            .bind(2, model_id)
            .bind(3, std::int64_t{d.attempts})
            .bind(4, static_cast<std::int64_t>(d.malformed_lines))
            .bind(5, d.message)
            .run();
    }
    auto meta = db_.prepare("INSERT INTO meta(key, value) VALUES ('kg_model', ?1) "
                            "ON CONFLICT(key) DO UPDATE SET value = excluded.value");
    meta.bind(1, model_id).run();
    tx.commit();
    return count();
}

namespace {

KgTuple tuple_from_row(db::Statement& s) {
    KgTuple t;
    t.tuple_id = s.column_text(0);
    t.subject = s.column_text(1);
    t.relation = s.column_text(2);
    t.object = s.column_text(3);
    t.reference_relation = s.column_text(4);
    t.reference_node = s.column_text(5);
    t.source_pid = s.column_text(6);
    t.source_doi = s.column_text(7);
    return t;
}

constexpr std::string_view kTupleColumns =
    "SELECT tuple_id, subject, relation, object, reference_relation, reference_node, source_pid, source_doi "
    "FROM tuples";

}  // namespace

std::vector<KgTuple> TupleStore::tuples() {
    std::map<std::string, std::vector<std::string>> markers;
    {
        auto s = db_.prepare("SELECT tuple_id, marker FROM tuple_markers ORDER BY tuple_id, position");
        while (s.step()) markers[s.column_text(0)].push_back(s.column_text(1));
    }
    auto s = db_.prepare(std::string(kTupleColumns) + " ORDER BY tuple_id");
    std::vector<KgTuple> out;
    while (s.step()) {
        auto t = tuple_from_row(s);
        if (auto it = markers.find(t.tuple_id); it != markers.end()) t.citation_markers = it->second;
        out.push_back(std::move(t));
    }
    return out;
}

std::optional<KgTuple> TupleStore::tuple(const std::string& tuple_id) {
    auto s = db_.prepare(std::string(kTupleColumns) + " WHERE tuple_id = ?1");
    s.bind(1, tuple_id);
    if (!s.step()) return std::nullopt;
    auto t = tuple_from_row(s);
    auto m = db_.prepare("SELECT marker FROM tuple_markers WHERE tuple_id = ?1 ORDER BY position");
    m.bind(1, tuple_id);
    while (m.step()) t.citation_markers.push_back(m.column_text(0));
    return t;
}

std::size_t TupleStore::count() { return static_cast<std::size_t>(db_.scalar("SELECT COUNT(*) FROM tuples")); }

CorpusStats TupleStore::corpus_stats() {
    CorpusStats stats;
    stats.tuple_count = count();
    stats.entity_count = static_cast<std::size_t>(
        db_.scalar("SELECT COUNT(*) FROM (SELECT subject FROM tuples UNION SELECT object FROM tuples)"));
    auto s = db_.prepare("SELECT source_doi, COUNT(*) FROM tuples GROUP BY source_doi");
    while (s.step()) stats.per_doi_counts[s.column_text(0)] = static_cast<std::size_t>(s.column_int(1));
    return stats;
}

std::map<std::string, std::size_t> TupleStore::entity_frequencies() {
    std::map<std::string, std::size_t> freq;
    auto s = db_.prepare(
        "SELECT surface, COUNT(*) FROM (SELECT subject AS surface FROM tuples UNION ALL "
        "SELECT object AS surface FROM tuples) GROUP BY surface");
    while (s.step()) freq[s.column_text(0)] = static_cast<std::size_t>(s.column_int(1));
    return freq;
}

std::vector<ExtractionDiagnostic> TupleStore::diagnostics() {
    std::vector<ExtractionDiagnostic> out;
    auto s = db_.prepare("SELECT pid, attempts, malformed_lines, message FROM extraction_diagnostics ORDER BY rowid");
    while (s.step()) {
        out.push_back({s.column_text(0), static_cast<int>(s.column_int(1)),
                       static_cast<std::size_t>(s.column_int(2)), s.column_text(3)});
    }
    return out;
}

BuildSummary build_kg(db::Database& db, providers::Generator& generator, const PromptTemplate& prompt,
                      int workers, const ProgressFn& progress) {
    corpus::ParagraphStore paragraphs_store(db);
    auto paragraphs = paragraphs_store.paragraphs();

    std::vector<ExtractionOutcome> outcomes(paragraphs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    auto work = [&] {
        for (auto i = next.fetch_add(1); i < paragraphs.size(); i = next.fetch_add(1)) {
            outcomes[i] = extract_tuples(paragraphs[i], generator, prompt);
            auto d = done.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(d, paragraphs.size());
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int w = 1; w < std::max(1, workers); ++w) pool.emplace_back(work);
        work();
    }

    BuildSummary summary;
    summary.paragraphs = paragraphs.size();
    std::vector<KgTuple> all;
    std::vector<ExtractionDiagnostic> diagnostics;
    for (auto& o : outcomes) {
        summary.malformed_lines += o.malformed_lines;
        if (o.diagnostic) {
            if (o.tuples.empty()) ++summary.failed_paragraphs;
            diagnostics.push_back(*o.diagnostic);
        }
        for (auto& t : o.tuples) all.push_back(std::move(t));
    }
    summary.tuples_extracted = all.size();
    TupleStore store(db);
    summary.tuples_stored = store.replace_all(all, diagnostics, generator.config().model_id);
    spdlog::info("knowledge graph built: {} paragraphs, {} tuples stored, {} diagnostics", summary.paragraphs,
                 summary.tuples_stored, diagnostics.size());
    return summary;
}

}  // namespace scholar::kg
