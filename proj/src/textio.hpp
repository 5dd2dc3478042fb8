#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gnss_sentry::textio {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

// Strict double parse of a whole token; rejects empty, trailing junk and
// non-finite values (NaN/inf are data errors everywhere we read numbers).
std::optional<double> parse_finite_double(std::string_view token);

std::optional<long long> parse_integer(std::string_view token);

std::string read_file(const std::string& path);

// Splits on '\n', dropping a trailing '\r' per line (LF or CRLF input).
std::vector<std::string_view> split_lines(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

}  // namespace gnss_sentry::textio
