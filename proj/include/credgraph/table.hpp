#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace credgraph {

/// Tab-delimited UTF-8 table with a mandatory header row. Fields may not
/// contain tabs or newlines; there is no quoting. All on-disk artifacts of
/// the pipeline use this shape (see docs/formats.md).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position for `name`, or throws SchemaError.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

Table read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const Table& table);

/// Strict numeric parsing with row/column context in error messages.
double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t row);
long long parse_int(const std::string& s, const std::filesystem::path& path, std::size_t row);

/// Shortest round-trip decimal formatting (used so rewritten artifacts are
/// byte-stable).
std::string format_double(double v);

}  // namespace credgraph
