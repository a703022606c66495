#include "scholar/corpus.hpp"

#include "scholar/errors.hpp"
#include "scholar/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace scholar::corpus {

using nlohmann::json;

namespace {

void validate_section(const Section& section, int parent_level, const std::string& doi) {
    if (section.level < 1) {
        throw InvariantError(doi + ": section '" + section.heading + "' has level < 1");
    }
    if (section.level <= parent_level) {
        throw InvariantError(doi + ": section '" + section.heading +
                             "' does not increase in level below its parent");
    }
    for (const auto& child : section.subsections) validate_section(child, section.level, doi);
}

void collect(const Section& section, std::vector<std::string>& path, const std::string& doi,
             std::vector<Paragraph>& out) {
    path.push_back(section.heading);
    int ordinal = 0;
    for (const auto& raw : section.paragraphs) {
        auto normalized = text::normalize_whitespace(raw);
        if (normalized.empty()) continue;
        Paragraph p;
        p.seq = static_cast<int>(out.size());
        p.pid = doi + "#p" + std::to_string(p.seq);
        p.doi = doi;
        p.section_path = path;
        p.ordinal = ordinal++;
        p.text = std::move(normalized);
        out.push_back(std::move(p));
    }
    for (const auto& child : section.subsections) collect(child, path, doi, out);
    path.pop_back();
}

Section section_from_json(const json& j) {
    Section s;
    s.heading = j.at("heading").get<std::string>();
    s.level = j.value("level", 1);
    if (j.contains("paragraphs")) s.paragraphs = j.at("paragraphs").get<std::vector<std::string>>();
    if (j.contains("subsections")) {
        for (const auto& child : j.at("subsections")) s.subsections.push_back(section_from_json(child));
    }
    return s;
}

json section_to_json(const Section& s) {
    json j = {{"heading", s.heading}, {"level", s.level}, {"paragraphs", s.paragraphs}};
    if (!s.subsections.empty()) {
        json children = json::array();
        for (const auto& child : s.subsections) children.push_back(section_to_json(child));
        j["subsections"] = std::move(children);
    }
    return j;
}

std::vector<std::string> common_prefix(const std::vector<std::vector<std::string>>& paths) {
    std::vector<std::string> prefix = paths.front();
    for (const auto& p : paths) {
        std::size_t n = 0;
        while (n < prefix.size() && n < p.size() && prefix[n] == p[n]) ++n;
        prefix.resize(n);
    }
    return prefix;
}

Paragraph paragraph_from_row(db::Statement& s) {
    Paragraph p;
    p.pid = s.column_text(0);
    p.doi = s.column_text(1);
    p.seq = static_cast<int>(s.column_int(2));
    p.section_path = json::parse(s.column_text(3)).get<std::vector<std::string>>();
    p.ordinal = static_cast<int>(s.column_int(4));
    p.text = s.column_text(5);
    return p;
}

Chunk chunk_from_row(db::Statement& s) {
    Chunk c;
    c.chunk_id = s.column_text(0);
    c.doi = s.column_text(1);
    c.section_path = json::parse(s.column_text(2)).get<std::vector<std::string>>();
    c.member_pids = json::parse(s.column_text(3)).get<std::vector<std::string>>();
    c.text = s.column_text(4);
    return c;
}

}  // namespace

void validate(const Document& doc) {
    if (doc.doi.empty()) throw InvariantError("document has an empty doi");
    for (const auto& section : doc.sections) validate_section(section, 0, doc.doi);
}

std::vector<Document> filter_corpus(const std::vector<Document>& docs,
                                    const std::vector<std::string>& keywords) {
    std::vector<std::string> needles;
    for (const auto& k : keywords) {
        auto t = text::trim(k);
        if (!t.empty()) needles.push_back(text::to_lower(t));
    }
    if (needles.empty()) throw ConfigError("keyword filter needs at least one keyword");

    std::vector<Document> kept;
    for (const auto& doc : docs) {
        const std::string haystack = text::to_lower(doc.title) + "\n" + text::to_lower(doc.abstract_text);
        bool match = std::any_of(needles.begin(), needles.end(), [&](const std::string& n) {
            return haystack.find(n) != std::string::npos;
        });
        if (match) kept.push_back(doc);
    }
    return kept;
}

std::vector<Paragraph> extract_paragraphs(const Document& doc) {
    validate(doc);
    std::vector<Paragraph> out;
    std::vector<std::string> path;
    for (const auto& section : doc.sections) collect(section, path, doc.doi, out);
    return out;
}

std::vector<Chunk> chunk_paragraphs(std::vector<Paragraph> paragraphs, const ChunkingOptions& options) {
    for (const auto& p : paragraphs) {
        if (p.section_path.empty()) {
            throw InvariantError("paragraph " + p.pid + " has an empty section path");
        }
    }
    std::sort(paragraphs.begin(), paragraphs.end(), [](const Paragraph& a, const Paragraph& b) {
        if (a.doi != b.doi) return a.doi < b.doi;
        return a.seq != b.seq ? a.seq < b.seq : a.pid < b.pid;
    });

    // Paragraph seq follows a depth-first walk, so each (top-level section,
    // first-level subsection) group is a contiguous run. Direct paragraphs of
    // a node precede its subsections, so a paragraph at group depth with
    // ordinal 0 always opens a new node; this keeps adjacent sections that
    // share a heading apart.
    struct Pending {
        std::string doi;
        std::vector<Paragraph> members;
    };
    auto same_group = [](const Paragraph& a, const Paragraph& b) {
        if (a.doi != b.doi || a.section_path[0] != b.section_path[0]) return false;
        bool sub_a = a.section_path.size() >= 2, sub_b = b.section_path.size() >= 2;
        if (sub_a != sub_b) return false;
        if (sub_a && a.section_path[1] != b.section_path[1]) return false;
        return !(b.section_path.size() <= 2 && b.ordinal == 0);
    };
    std::vector<Pending> ordered;
    for (auto& p : paragraphs) {
        if (ordered.empty() || !same_group(ordered.back().members.back(), p)) {
            ordered.push_back({p.doi, {}});
        }
        ordered.back().members.push_back(std::move(p));
    }

    std::vector<Chunk> chunks;
    std::map<std::string, int> next_index;
    auto emit = [&](const std::string& doi, const std::vector<const Paragraph*>& members) {
        Chunk c;
        c.doi = doi;
        c.chunk_id = doi + "#c" + std::to_string(next_index[doi]++);
        std::vector<std::vector<std::string>> paths;
        std::vector<std::string> texts;
        for (const auto* m : members) {
            c.member_pids.push_back(m->pid);
            paths.push_back(m->section_path);
            texts.push_back(m->text);
        }
        c.section_path = common_prefix(paths);
        c.text = text::join(texts, options.separator);
        chunks.push_back(std::move(c));
    };

    for (const auto& group : ordered) {
        std::vector<const Paragraph*> current;
        std::size_t tokens = 0;
        for (const auto& p : group.members) {
            auto n = text::whitespace_token_count(p.text);
            if (!current.empty() && tokens + n > options.max_tokens) {
                emit(group.doi, current);
                current.clear();
                tokens = 0;
            }
            current.push_back(&p);
            tokens += n;
        }
        if (!current.empty()) emit(group.doi, current);
    }
    return chunks;
}

Document parse_document(std::string_view json_line) {
    json j = json::parse(json_line);
    Document d;
    d.doi = j.at("doi").get<std::string>();
    d.title = j.value("title", "");
    d.abstract_text = j.value("abstract", "");
    if (j.contains("sections")) {
        for (const auto& s : j.at("sections")) d.sections.push_back(section_from_json(s));
    }
    return d;
}

std::string serialize_document(const Document& doc) {
    json sections = json::array();
    for (const auto& s : doc.sections) sections.push_back(section_to_json(s));
    json j = {{"doi", doc.doi}, {"title", doc.title}, {"abstract", doc.abstract_text},
              {"sections", std::move(sections)}};
    return j.dump();
}

std::vector<Document> load_corpus(const std::string& path) {
    std::vector<Document> docs;
    std::set<std::string> seen;
    int line_no = 0;
    for (const auto& line : text::lines(text::read_file(path))) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        Document d;
        try {
            d = parse_document(line);
            validate(d);
        } catch (const json::exception& e) {
            throw InvariantError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const InvariantError& e) {
            throw InvariantError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!seen.insert(d.doi).second) {
            throw InvariantError(path + ":" + std::to_string(line_no) + ": duplicate doi " + d.doi);
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<std::string> load_keywords(const std::string& path) {
    return text::list_entries(text::read_file(path));
}

ParagraphStore::ParagraphStore(db::Database& db) : db_(db) { db::ensure_schema(db_); }

void ParagraphStore::replace_documents(const std::vector<Document>& docs,
                                       const std::vector<Paragraph>& paragraphs,
                                       const std::vector<Chunk>& chunks) {
    db::Transaction tx(db_);
    auto del_markers = db_.prepare(
        "DELETE FROM tuple_markers WHERE tuple_id IN (SELECT tuple_id FROM tuples WHERE source_doi = ?1)");
    auto del_tuples = db_.prepare("DELETE FROM tuples WHERE source_doi = ?1");
    auto del_vectors = db_.prepare(
        "DELETE FROM vectors WHERE chunk_id IN (SELECT chunk_id FROM chunks WHERE doi = ?1)");
    auto del_chunks = db_.prepare("DELETE FROM chunks WHERE doi = ?1");
    auto del_paragraphs = db_.prepare("DELETE FROM paragraphs WHERE doi = ?1");
    auto upsert_doc = db_.prepare(
        "INSERT INTO documents(doi, title, abstract) VALUES (?1, ?2, ?3) "
        "ON CONFLICT(doi) DO UPDATE SET title = excluded.title, abstract = excluded.abstract");
    for (const auto& d : docs) {
        for (auto* stmt : {&del_markers, &del_tuples, &del_vectors, &del_chunks, &del_paragraphs}) {
            stmt->bind(1, d.doi).run();
        }
        upsert_doc.bind(1, d.doi).bind(2, d.title).bind(3, d.abstract_text).run();
    }
    auto ins_p = db_.prepare(
        "INSERT INTO paragraphs(pid, doi, seq, section_path, ordinal, text) VALUES (?1, ?2, ?3, ?4, ?5, ?6)");
    for (const auto& p : paragraphs) {
        ins_p.bind(1, p.pid)
            .bind(2, p.doi)
            .bind(3, std::int64_t{p.seq})
            .bind(4, json(p.section_path).dump())
            .bind(5, std::int64_t{p.ordinal})
            .bind(6, p.text)
            .run();
    }
    auto ins_c = db_.prepare(
        "INSERT INTO chunks(chunk_id, doi, seq, section_path, member_pids, text) VALUES (?1, ?2, ?3, ?4, ?5, ?6)");
    std::int64_t seq = 0;
    for (const auto& c : chunks) {
        ins_c.bind(1, c.chunk_id)
            .bind(2, c.doi)
            .bind(3, seq++)
            .bind(4, json(c.section_path).dump())
            .bind(5, json(c.member_pids).dump())
            .bind(6, c.text)
            .run();
    }
    tx.commit();
}

std::optional<Paragraph> ParagraphStore::paragraph(const std::string& pid) {
    auto s = db_.prepare("SELECT pid, doi, seq, section_path, ordinal, text FROM paragraphs WHERE pid = ?1");
    s.bind(1, pid);
    if (!s.step()) return std::nullopt;
    return paragraph_from_row(s);
}

bool ParagraphStore::has_paragraph(const std::string& pid) {
    auto s = db_.prepare("SELECT 1 FROM paragraphs WHERE pid = ?1");
    s.bind(1, pid);
    return s.step();
}

std::vector<Paragraph> ParagraphStore::paragraphs() {
    auto s = db_.prepare("SELECT pid, doi, seq, section_path, ordinal, text FROM paragraphs ORDER BY doi, seq");
    std::vector<Paragraph> out;
    while (s.step()) out.push_back(paragraph_from_row(s));
    return out;
}

std::optional<Chunk> ParagraphStore::chunk(const std::string& chunk_id) {
    auto s = db_.prepare("SELECT chunk_id, doi, section_path, member_pids, text FROM chunks WHERE chunk_id = ?1");
    s.bind(1, chunk_id);
    if (!s.step()) return std::nullopt;
    return chunk_from_row(s);
}

std::vector<Chunk> ParagraphStore::chunks() {
    auto s = db_.prepare("SELECT chunk_id, doi, section_path, member_pids, text FROM chunks ORDER BY doi, seq");
    std::vector<Chunk> out;
    while (s.step()) out.push_back(chunk_from_row(s));
    return out;
}

std::size_t ParagraphStore::document_count() {
    return static_cast<std::size_t>(db_.scalar("SELECT COUNT(*) FROM documents"));
}

std::size_t ParagraphStore::paragraph_count() {
    return static_cast<std::size_t>(db_.scalar("SELECT COUNT(*) FROM paragraphs"));
}

std::size_t ParagraphStore::chunk_count() {
    return static_cast<std::size_t>(db_.scalar("SELECT COUNT(*) FROM chunks"));
}

IngestSummary ingest(db::Database& db, const std::vector<Document>& docs,
                     const std::vector<std::string>& keywords, const ChunkingOptions& options) {
    IngestSummary summary;
    summary.documents_read = docs.size();
    auto kept = keywords.empty() ? docs : filter_corpus(docs, keywords);
    summary.documents_kept = kept.size();

    std::set<std::string> seen;
    std::vector<Paragraph> paragraphs;
    for (const auto& doc : kept) {
        if (!seen.insert(doc.doi).second) throw InvariantError("duplicate doi " + doc.doi);
        auto ps = extract_paragraphs(doc);
        paragraphs.insert(paragraphs.end(), ps.begin(), ps.end());
    }
    auto chunks = chunk_paragraphs(paragraphs, options);
    summary.paragraphs = paragraphs.size();
    summary.chunks = chunks.size();

    ParagraphStore store(db);
    store.replace_documents(kept, paragraphs, chunks);
    return summary;
}

}  // namespace scholar::corpus
