#pragma once

// Minimal numeric CSV reading/writing shared by the corpus, pipeline and
// report writers. Header row required; every data cell must parse as a double.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace affectfuse::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;  // column-major
  std::size_t rows = 0;

  // Index of a header name, or -1.
  int find(std::string_view name) const;
};

/// Reads a numeric CSV. Non-finite cells are kept (callers validate);
/// unparseable cells raise Errc::io_error naming row and column.
Table read_numeric(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

// Shortest round-trip decimal representation.
std::string format_double(double v);

std::vector<std::string_view> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

}  // namespace affectfuse::csv
