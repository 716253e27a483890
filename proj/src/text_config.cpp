#include "svct/text_config.hpp"

#include <charconv>
#include <cmath>

#include "svct/error.hpp"

namespace svct {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
    KeyValues out;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        const auto line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError("line " + std::to_string(line_no) + ": expected key=value");
        }
        out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return out;
}

const std::string* find_value(const KeyValues& kv, std::string_view key) {
    const std::string* found = nullptr;
    for (const auto& [k, v] : kv) {
        if (k == key) found = &v;
    }
    return found;
}

const std::string& require_value(const KeyValues& kv, std::string_view key) {
    const auto* v = find_value(kv, key);
    if (!v) throw FormatError("missing header field '" + std::string(key) + "'");
    return *v;
}

double parse_double(std::string_view key, std::string_view value) {
    double out = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw FormatError("field '" + std::string(key) + "': not a finite number: '" + std::string(value) + "'");
    }
    return out;
}

long long parse_int64(std::string_view key, std::string_view value) {
    long long out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw FormatError("field '" + std::string(key) + "': not an integer: '" + std::string(value) + "'");
    }
    return out;
}

int parse_int(std::string_view key, std::string_view value) {
    const long long v = parse_int64(key, value);
    if (v < -2147483647LL || v > 2147483647LL) {
        throw FormatError("field '" + std::string(key) + "': integer out of range");
    }
    return static_cast<int>(v);
}

std::vector<double> parse_double_list(std::string_view key, std::string_view value) {
    std::vector<double> out;
    if (trim(value).empty()) return out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        auto end = value.find(',', pos);
        if (end == std::string_view::npos) end = value.size();
        out.push_back(parse_double(key, trim(value.substr(pos, end - pos))));
        pos = end + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

}  // namespace svct
