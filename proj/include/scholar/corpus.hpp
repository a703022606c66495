#pragma once

#include "scholar/db.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scholar::corpus {

/// A node of a parsed article's section tree.
struct Section {
    std::string heading;
    int level = 1;
    std::vector<std::string> paragraphs;
    std::vector<Section> subsections;
};

struct Document {
    std::string doi;
    std::string title;
    std::string abstract_text;
    std::vector<Section> sections;
};

struct Paragraph {
    std::string pid;  // "<doi>#p<index>"
    std::string doi;
    std::vector<std::string> section_path;
    int ordinal = 0;  // position within the owning section node
    int seq = 0;      // position within the document
    std::string text;

    bool operator==(const Paragraph&) const = default;
};

/// Paragraphs of one first-level subsection concatenated into a retrieval unit.
struct Chunk {
    std::string chunk_id;  // "<doi>#c<index>"
    std::string doi;
    std::vector<std::string> section_path;
    std::vector<std::string> member_pids;
    std::string text;

    bool operator==(const Chunk&) const = default;
};

struct ChunkingOptions {
    /// Whitespace-token budget; larger groups are split at paragraph boundaries.
    std::size_t max_tokens = 8000;
    std::string separator = "\n";
};

/// Throws InvariantError when the document breaks a structural invariant
/// (empty doi, level < 1, levels not strictly increasing toward the leaves).
void validate(const Document& doc);

/// Documents whose title or abstract contains at least one keyword
/// (case-insensitive). Input order is preserved. Throws ConfigError when
/// `keywords` is empty.
std::vector<Document> filter_corpus(const std::vector<Document>& docs,
                                    const std::vector<std::string>& keywords);

/// One Paragraph per non-blank source paragraph, in document order.
std::vector<Paragraph> extract_paragraphs(const Document& doc);

/// Groups paragraphs by (doi, top-level section, first-level subsection),
/// deeper subsections folding into their first-level ancestor. Paragraphs
/// sitting directly under a top-level section form their own group. Groups
/// are contiguous runs in (doi, seq) order, so result order and chunk ids do
/// not depend on input order. Two adjacent first-level subsections with the
/// same heading merge only when the second has no direct paragraphs.
std::vector<Chunk> chunk_paragraphs(std::vector<Paragraph> paragraphs,
                                    const ChunkingOptions& options = {});

// Line-delimited JSON corpus format, one document per line:
// {"doi": ..., "title": ..., "abstract": ...,
//  "sections": [{"heading": ..., "level": 1, "paragraphs": [...], "subsections": [...]}]}
Document parse_document(std::string_view json_line);
std::string serialize_document(const Document& doc);

/// Loads a corpus file. Blank lines are skipped; a malformed record or a
/// duplicate doi throws InvariantError naming the line.
std::vector<Document> load_corpus(const std::string& path);

/// One keyword per line, '#' comments allowed.
std::vector<std::string> load_keywords(const std::string& path);

/// Documents, paragraphs and chunks tables.
class ParagraphStore {
public:
    explicit ParagraphStore(db::Database& db);

    /// Replaces everything stored for each document's doi, including derived
    /// vectors and tuples, then writes documents, paragraphs and chunks in one
    /// transaction.
    void replace_documents(const std::vector<Document>& docs,
                           const std::vector<Paragraph>& paragraphs,
                           const std::vector<Chunk>& chunks);

    std::optional<Paragraph> paragraph(const std::string& pid);
    bool has_paragraph(const std::string& pid);
    std::vector<Paragraph> paragraphs();
    std::optional<Chunk> chunk(const std::string& chunk_id);
    std::vector<Chunk> chunks();

    std::size_t document_count();
    std::size_t paragraph_count();
    std::size_t chunk_count();

private:
    db::Database& db_;
};

struct IngestSummary {
    std::size_t documents_read = 0;
    std::size_t documents_kept = 0;
    std::size_t paragraphs = 0;
    std::size_t chunks = 0;
};

/// filter_corpus -> extract_paragraphs -> chunk_paragraphs -> store.
/// An empty keyword list keeps every document.
IngestSummary ingest(db::Database& db, const std::vector<Document>& docs,
                     const std::vector<std::string>& keywords,
                     const ChunkingOptions& options = {});

}  // namespace scholar::corpus
