#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

struct sqlite3;
struct sqlite3_stmt;

namespace scholar::db {

class Statement;

/// One SQLite connection. All stores of a deployment live in a single
/// database file; each component opens its own connection so readers see
/// the last committed snapshot while a build is writing (WAL mode).
class Database {
public:
    explicit Database(const std::string& path);
    ~Database();

    Database(Database&& other) noexcept;
    Database& operator=(Database&& other) noexcept;
    Database(const Database&) = delete;
    Database& operator=(const Database&) = delete;

    void exec(std::string_view sql);
    Statement prepare(std::string_view sql);

    /// Scalar integer query helper (first column of first row, 0 when no row).
    std::int64_t scalar(std::string_view sql);

    /// Rows changed by the most recent statement on this connection.
    int changes() const;

    const std::string& path() const noexcept { return path_; }
    sqlite3* handle() const noexcept { return db_; }

private:
    sqlite3* db_ = nullptr;
    std::string path_;
};

class Statement {
public:
    Statement(sqlite3* db, std::string_view sql);
    ~Statement();

    Statement(Statement&& other) noexcept;
    Statement& operator=(Statement&&) = delete;
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    // Binding indices are 1-based, as in SQLite.
    Statement& bind(int index, std::string_view value);
    Statement& bind(int index, std::int64_t value);
    Statement& bind(int index, double value);
    Statement& bind_blob(int index, std::span<const std::uint8_t> bytes);
    Statement& bind_null(int index);

    /// Returns true while a row is available.
    bool step();
    /// Runs to completion, for statements that return no rows.
    void run();
    void reset();

    std::string column_text(int index) const;
    std::int64_t column_int(int index) const;
    double column_double(int index) const;
    std::vector<std::uint8_t> column_blob(int index) const;
    bool column_is_null(int index) const;

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

/// RAII write transaction (BEGIN IMMEDIATE ... COMMIT, rollback on unwind).
class Transaction {
public:
    explicit Transaction(Database& db);
    ~Transaction();
    Transaction(const Transaction&) = delete;
    Transaction& operator=(const Transaction&) = delete;

    void commit();

private:
    Database& db_;
    bool done_ = false;
};

/// Creates every table used by the engine if missing.
void ensure_schema(Database& db);

}  // namespace scholar::db
