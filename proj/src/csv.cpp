#include "csv.hpp"

#include "affectfuse/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace affectfuse::csv {

int Table::find(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, fmt::format("cannot write {}", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::io_error, fmt::format("short write to {}", path.string()));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) { return fmt::format("{}", v); }

namespace {

double parse_cell(std::string_view cell, std::size_t row, std::string_view column, const std::filesystem::path& path) {
  double v = 0.0;
  if (cell.empty())
    throw Error(Errc::io_error, fmt::format("{}: empty cell at row {} column '{}'", path.string(), row, column));
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    // from_chars rejects some spellings of non-finite values.
    if (cell == "NaN" || cell == "nan" || cell == "NAN") return std::numeric_limits<double>::quiet_NaN();
    if (cell == "inf" || cell == "Inf" || cell == "INF") return std::numeric_limits<double>::infinity();
    if (cell == "-inf" || cell == "-Inf" || cell == "-INF") return -std::numeric_limits<double>::infinity();
    throw Error(Errc::io_error, fmt::format("{}: cannot parse '{}' at row {} column '{}'", path.string(), cell, row, column));
  }
  return v;
}

}  // namespace

Table read_numeric(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  Table t;
  std::string_view rest(text);
  bool have_header = false;
  std::size_t row = 0;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    std::string_view line = nl == std::string_view::npos ? rest : rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    if (trim(line).empty()) continue;
    if (!have_header) {
      for (auto name : split(line)) t.header.emplace_back(name);
      t.columns.resize(t.header.size());
      have_header = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw Error(Errc::io_error, fmt::format("{}: row {} has {} cells, header has {}", path.string(), row,
                                              cells.size(), t.header.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) t.columns[c].push_back(parse_cell(cells[c], row, t.header[c], path));
    ++row;
  }
  if (!have_header) throw Error(Errc::io_error, fmt::format("{}: missing header row", path.string()));
  t.rows = row;
  return t;
}

}  // namespace affectfuse::csv
