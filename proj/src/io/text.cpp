#include "dseno/io/text.hpp"

#include <cerrno>
#include <charconv>
#include <fstream>
#include <sstream>

namespace dseno::io {

namespace {

[[noreturn]] void bad_value(const std::string& what, const std::string& value, const char* expected) {
    throw ConfigError("'" + what + "': expected " + expected + ", got '" + value + "'");
}

}  // namespace

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source) {
    std::vector<KeyValue> out;
    std::size_t line_no = 0, start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        const std::string line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        ++line_no;
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        KeyValue kv{trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), line_no};
        if (kv.key.empty()) throw ConfigError(where + ": empty key");
        for (const KeyValue& prev : out) {
            if (prev.key == kv.key) {
                throw ConfigError(where + ": key '" + kv.key + "' repeats line " + std::to_string(prev.line));
            }
        }
        out.push_back(std::move(kv));
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(Errc::io_failure, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw DataError(Errc::io_failure, "cannot read " + path.string());
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError(Errc::io_failure, "cannot write " + path.string());
}

std::size_t parse_size(const std::string& value, const std::string& what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
        bad_value(what, value, "a non-negative integer");
    }
    return v;
}

long parse_long(const std::string& value, const std::string& what) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) bad_value(what, value, "an integer");
    return v;
}

double parse_double(const std::string& value, const std::string& what) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) bad_value(what, value, "a number");
    return v;
}

bool parse_bool(const std::string& value, const std::string& what) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    bad_value(what, value, "true or false");
}

std::vector<int> parse_int_list(const std::string& value, const std::string& what) {
    std::string body = trim(value);
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') bad_value(what, value, "a list like [1,3,5]");
        body = body.substr(1, body.size() - 2);
    }
    std::vector<int> out;
    if (trim(body).empty()) return out;
    for (const std::string& item : split(body, ',')) out.push_back(static_cast<int>(parse_long(item, what)));
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace dseno::io
