#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace scholar::text {

/// ASCII lowercase; bytes outside ASCII are copied unchanged.
std::string to_lower(std::string_view s);

std::string_view trim(std::string_view s);

/// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view s);

/// Word characters are ASCII alphanumerics, '_' and every non-ASCII byte,
/// so UTF-8 letters stay inside their token.
bool is_word_byte(char c) noexcept;

/// Lowercased maximal runs of alphanumeric bytes (non-ASCII bytes included).
std::vector<std::string> word_tokens(std::string_view s);

/// Number of whitespace-separated tokens. This is the token estimator for
/// local providers and for chunk and prompt budgets.
std::size_t whitespace_token_count(std::string_view s);

/// Case-insensitive whole-word search: `needle` must occur in `haystack`
/// with no word byte immediately before or after it.
bool contains_word(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char delimiter);

/// Splits into lines, dropping '\r'.
std::vector<std::string> lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view separator);

/// Replaces every occurrence of `from` with `to`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Lowercase hex encoding of raw bytes, and its inverse (throws on bad input).
std::string hex_encode(std::string_view bytes);
std::string hex_decode(std::string_view hex);

/// Reads a whole file; throws scholar::Error when it cannot be opened.
std::string read_file(const std::string& path);

/// Non-empty, non-comment ('#') trimmed lines of a list file.
std::vector<std::string> list_entries(std::string_view content);

}  // namespace scholar::text
