#include "scholar/db.hpp"

#include "scholar/errors.hpp"

#include <sqlite3.h>

#include <utility>

namespace scholar::db {

namespace {

// Table layout. Vector and centroid blobs are a little-endian uint32 dim
// header followed by dim little-endian float32 values.
constexpr std::string_view kSchema = R"sql(
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS documents (
    doi      TEXT PRIMARY KEY,
    title    TEXT NOT NULL,
    abstract TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS paragraphs (
    pid          TEXT PRIMARY KEY,
    doi          TEXT NOT NULL REFERENCES documents(doi),
    seq          INTEGER NOT NULL,
    section_path TEXT NOT NULL,
    ordinal      INTEGER NOT NULL,
    text         TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS paragraphs_doi ON paragraphs(doi, seq);
CREATE TABLE IF NOT EXISTS chunks (
    chunk_id     TEXT PRIMARY KEY,
    doi          TEXT NOT NULL REFERENCES documents(doi),
    seq          INTEGER NOT NULL,
    section_path TEXT NOT NULL,
    member_pids  TEXT NOT NULL,
    text         TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS vectors (
    chunk_id TEXT PRIMARY KEY REFERENCES chunks(chunk_id),
    model_id TEXT NOT NULL,
    dim      INTEGER NOT NULL,
    vector   BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS tuples (
    tuple_id           TEXT PRIMARY KEY,
    subject            TEXT NOT NULL,
    relation           TEXT NOT NULL,
    object             TEXT NOT NULL,
    reference_relation TEXT NOT NULL DEFAULT '',
    reference_node     TEXT NOT NULL DEFAULT '',
    source_pid         TEXT NOT NULL REFERENCES paragraphs(pid),
    source_doi         TEXT NOT NULL,
    UNIQUE (subject, relation, object, source_pid)
);
CREATE TABLE IF NOT EXISTS tuple_markers (
    tuple_id TEXT NOT NULL REFERENCES tuples(tuple_id),
    position INTEGER NOT NULL,
    marker   TEXT NOT NULL,
    PRIMARY KEY (tuple_id, position)
);
CREATE TABLE IF NOT EXISTS extraction_diagnostics (
    pid             TEXT NOT NULL,
    model_id        TEXT NOT NULL,
    attempts        INTEGER NOT NULL,
    malformed_lines INTEGER NOT NULL,
    message         TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS canonical_entities (
    canonical_id TEXT PRIMARY KEY,
    label        TEXT NOT NULL,
    member_count INTEGER NOT NULL,
    is_numeric   INTEGER NOT NULL,
    centroid     BLOB NOT NULL,
    embedding    BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS canonical_map (
    surface      TEXT PRIMARY KEY,
    canonical_id TEXT NOT NULL REFERENCES canonical_entities(canonical_id)
);
CREATE TABLE IF NOT EXISTS feedback (
    id             INTEGER PRIMARY KEY AUTOINCREMENT,
    subject_ref    TEXT NOT NULL,
    pipeline       TEXT NOT NULL,
    content_score  INTEGER NOT NULL,
    citation_score INTEGER NOT NULL,
    notes          TEXT NOT NULL,
    rater_id       TEXT NOT NULL,
    created_at     TEXT NOT NULL DEFAULT (datetime('now'))
);
)sql";

[[noreturn]] void fail(sqlite3* db, std::string_view what) {
    throw StoreError(std::string(what) + ": " + (db ? sqlite3_errmsg(db) : "no connection"));
}

}  // namespace

Database::Database(const std::string& path) : path_(path) {
    int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
    if (sqlite3_open_v2(path.c_str(), &db_, flags, nullptr) != SQLITE_OK) {
        std::string msg = "cannot open database " + path + ": " + sqlite3_errmsg(db_);
        sqlite3_close(db_);
        db_ = nullptr;
        throw StoreError(msg);
    }
    sqlite3_busy_timeout(db_, 10000);
    exec("PRAGMA journal_mode=WAL");
    exec("PRAGMA foreign_keys=ON");
}

Database::~Database() {
    if (db_) sqlite3_close_v2(db_);
}

Database::Database(Database&& other) noexcept
    : db_(std::exchange(other.db_, nullptr)), path_(std::move(other.path_)) {}

Database& Database::operator=(Database&& other) noexcept {
    if (this != &other) {
        if (db_) sqlite3_close_v2(db_);
        db_ = std::exchange(other.db_, nullptr);
        path_ = std::move(other.path_);
    }
    return *this;
}

void Database::exec(std::string_view sql) {
    char* err = nullptr;
    std::string owned(sql);
    if (sqlite3_exec(db_, owned.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw StoreError("sql failed: " + msg);
    }
}

Statement Database::prepare(std::string_view sql) { return Statement(db_, sql); }

std::int64_t Database::scalar(std::string_view sql) {
    auto stmt = prepare(sql);
    return stmt.step() ? stmt.column_int(0) : 0;
}

int Database::changes() const { return sqlite3_changes(db_); }

Statement::Statement(sqlite3* db, std::string_view sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &stmt_, nullptr) != SQLITE_OK) {
        fail(db, "prepare failed");
    }
}

Statement::~Statement() {
    if (stmt_) sqlite3_finalize(stmt_);
}

Statement::Statement(Statement&& other) noexcept
    : db_(other.db_), stmt_(std::exchange(other.stmt_, nullptr)) {}

Statement& Statement::bind(int index, std::string_view value) {
    if (sqlite3_bind_text(stmt_, index, value.data(), static_cast<int>(value.size()),
                          SQLITE_TRANSIENT) != SQLITE_OK) {
        fail(db_, "bind failed");
    }
    return *this;
}

Statement& Statement::bind(int index, std::int64_t value) {
    if (sqlite3_bind_int64(stmt_, index, value) != SQLITE_OK) fail(db_, "bind failed");
    return *this;
}

Statement& Statement::bind(int index, double value) {
    if (sqlite3_bind_double(stmt_, index, value) != SQLITE_OK) fail(db_, "bind failed");
    return *this;
}

Statement& Statement::bind_blob(int index, std::span<const std::uint8_t> bytes) {
    if (sqlite3_bind_blob(stmt_, index, bytes.data(), static_cast<int>(bytes.size()),
                          SQLITE_TRANSIENT) != SQLITE_OK) {
        fail(db_, "bind failed");
    }
    return *this;
}

Statement& Statement::bind_null(int index) {
    if (sqlite3_bind_null(stmt_, index) != SQLITE_OK) fail(db_, "bind failed");
    return *this;
}

bool Statement::step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    fail(db_, "step failed");
}

void Statement::run() {
    while (step()) {
    }
    reset();
}

void Statement::reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
}

std::string Statement::column_text(int index) const {
    auto* p = sqlite3_column_text(stmt_, index);
    int n = sqlite3_column_bytes(stmt_, index);
    return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(n)) : std::string();
}

std::int64_t Statement::column_int(int index) const { return sqlite3_column_int64(stmt_, index); }

double Statement::column_double(int index) const { return sqlite3_column_double(stmt_, index); }

std::vector<std::uint8_t> Statement::column_blob(int index) const {
    auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(stmt_, index));
    int n = sqlite3_column_bytes(stmt_, index);
    return p ? std::vector<std::uint8_t>(p, p + n) : std::vector<std::uint8_t>{};
}

bool Statement::column_is_null(int index) const {
    return sqlite3_column_type(stmt_, index) == SQLITE_NULL;
}

Transaction::Transaction(Database& db) : db_(db) { db_.exec("BEGIN IMMEDIATE"); }

Transaction::~Transaction() {
    if (!done_) {
        try {
            db_.exec("ROLLBACK");
        } catch (...) {
        }
    }
}

void Transaction::commit() {
    db_.exec("COMMIT");
    done_ = true;
}

void ensure_schema(Database& db) {
    // Read-only check first: CREATE ... IF NOT EXISTS takes the write lock even
    // when nothing changes, which would stall readers during a build.
    constexpr std::string_view kCheck =
        "SELECT COUNT(*) FROM sqlite_master WHERE type = 'table' AND name IN ("
        "'meta', 'documents', 'paragraphs', 'chunks', 'vectors', 'tuples', 'tuple_markers', "
        "'extraction_diagnostics', 'canonical_entities', 'canonical_map', 'feedback')";
    if (db.scalar(kCheck) == 11) return;
    db.exec(kSchema);
}

}  // namespace scholar::db
