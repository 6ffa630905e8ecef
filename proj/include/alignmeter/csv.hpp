#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace alignmeter::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

/// Reads delimiter-separated text with RFC-4180 style quoting. Blank lines are skipped.
std::vector<Row> read(std::istream& in, char delimiter = ',');

/// Quotes a field when it contains the delimiter, a quote, or a line break.
std::string escape(std::string_view field, char delimiter = ',');

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a full field as a double; false on trailing junk or empty input.
bool parse_double(std::string_view text, double& out);

}  // namespace alignmeter::csv
