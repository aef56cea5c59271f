#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dseno/core/error.hpp"

namespace dseno::io {

/// One `key = value` line. `line` is 1-based.
struct KeyValue {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; keys and values are trimmed. Throws ConfigError on a line without
/// '=', an empty key, or a repeated key.
std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source);

/// Throws DataError(io_failure) naming the path.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Value parsers; `what` names the key in the ConfigError message.
std::size_t parse_size(const std::string& value, const std::string& what);
long parse_long(const std::string& value, const std::string& what);
double parse_double(const std::string& value, const std::string& what);
bool parse_bool(const std::string& value, const std::string& what);
std::vector<int> parse_int_list(const std::string& value, const std::string& what);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace dseno::io
