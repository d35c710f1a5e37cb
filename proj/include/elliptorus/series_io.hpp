#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "elliptorus/series.hpp"

namespace elliptorus {

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view s);

/// Text format: a `dims n1 n2` header, then one `m.. | l.. | lbar.. | k.. | re im` line per term.
/// `#` starts a comment.
void write_series(std::ostream& os, const Series& g);
Series read_series(std::istream& is);

std::string series_to_string(const Series& g);
Series series_from_string(const std::string& text);

void save_series(const std::string& path, const Series& g);
Series load_series(const std::string& path);

namespace detail {
/// Splits a term line into its five '|' separated fields.
std::vector<std::string> split_fields(const std::string& line, char sep);
std::vector<int> parse_ints(const std::string& field);
std::string strip_comment(const std::string& line);
std::string trim(const std::string& s);
}  // namespace detail

}  // namespace elliptorus
