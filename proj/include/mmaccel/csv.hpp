#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mmaccel::csv {

/// Shortest-safe round-trip formatting: 17 significant digits.
std::string format(double v);

/// Quotes a field per RFC 4180 when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Writes one CRLF-free record (rows end in '\n').
void write_row(std::ostream& out, const std::vector<std::string>& fields);
void write_row(std::ostream& out, const std::vector<double>& values);

/// Splits one record; handles quoted fields. Does not support embedded newlines.
std::vector<std::string> split_row(std::string_view line);

/// Reads a whole table: header plus numeric rows.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
Table read_numeric(std::istream& in);

}  // namespace mmaccel::csv
