#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace svct {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses "key=value" lines. Blank lines and lines starting with '#' are
/// skipped; surrounding whitespace is trimmed. A line without '=' is an error.
KeyValues parse_key_values(std::string_view text);

/// Last value for `key`, or nullptr.
const std::string* find_value(const KeyValues& kv, std::string_view key);
const std::string& require_value(const KeyValues& kv, std::string_view key);

double parse_double(std::string_view key, std::string_view value);
int parse_int(std::string_view key, std::string_view value);
long long parse_int64(std::string_view key, std::string_view value);
std::vector<double> parse_double_list(std::string_view key, std::string_view value);

/// Shortest text that parses back to exactly the same double.
std::string format_double(double v);
std::string join_doubles(const std::vector<double>& values);

}  // namespace svct
