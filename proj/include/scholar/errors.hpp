#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scholar {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: empty keyword list, wrong provider role, bad template.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A caller violated an operation precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A record violates a domain-type invariant.
class InvariantError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    ProviderError(std::string message, bool retryable, int attempts, std::string tag = "provider")
        : Error(std::move(message)), retryable_(retryable), attempts_(attempts), tag_(std::move(tag)) {}

    bool retryable() const noexcept { return retryable_; }
    int attempts() const noexcept { return attempts_; }
    /// "timeout", "http", "refusal", "protocol" or "provider".
    const std::string& tag() const noexcept { return tag_; }

private:
    bool retryable_;
    int attempts_;
    std::string tag_;
};

/// Some chunks could not be embedded; the index holds only the committed ones.
class PartialIndexError : public Error {
public:
    PartialIndexError(std::vector<std::string> failed_ids, std::size_t indexed)
        : Error(describe(failed_ids)), failed_ids_(std::move(failed_ids)), indexed_(indexed) {}

    const std::vector<std::string>& failed_ids() const noexcept { return failed_ids_; }
    std::size_t indexed() const noexcept { return indexed_; }

private:
    static std::string describe(const std::vector<std::string>& ids) {
        std::string msg = "embedding failed for " + std::to_string(ids.size()) + " chunk(s):";
        for (const auto& id : ids) msg += " " + id;
        return msg;
    }

    std::vector<std::string> failed_ids_;
    std::size_t indexed_;
};

/// A tuple refers to a paragraph id that is not in the paragraph store.
class IntegrityError : public Error {
public:
    explicit IntegrityError(std::string pid)
        : Error("dangling source_pid: " + pid), pid_(std::move(pid)) {}
    const std::string& pid() const noexcept { return pid_; }

private:
    std::string pid_;
};

class EmptyIndexError : public Error {
public:
    EmptyIndexError() : Error("vector index is empty") {}
    explicit EmptyIndexError(std::string message) : Error(std::move(message)) {}
};

/// Query reduced to zero keywords after preprocessing.
class EmptyQueryError : public Error {
public:
    EmptyQueryError() : Error("query has no searchable terms; please refine the question") {}
    explicit EmptyQueryError(std::string message) : Error(std::move(message)) {}
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class StoreError : public Error {
public:
    using Error::Error;
};

/// Mean of an empty metric list.
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace scholar
