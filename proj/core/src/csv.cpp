#include "balw/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "balw/errors.hpp"

namespace balw::csv {
namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(Trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::size_t Table::Column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return j;
  }
  throw IngestionError("missing column", path, 0, name);
}

bool Table::HasColumn(const std::string& name) const {
  for (const auto& h : header) {
    if (h == name) return true;
  }
  return false;
}

Table ReadNumeric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open file", path);

  Table table;
  table.path = path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    table.header = SplitLine(line);
    break;
  }
  if (table.header.empty()) throw IngestionError("empty file", path);

  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitLine(line);
    if (cells.size() != table.header.size()) {
      throw IngestionError("expected " + std::to_string(table.header.size()) + " cells, found " +
                               std::to_string(cells.size()),
                           path, line_no);
    }
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& cell = cells[j];
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, row[j]);
      if (cell.empty() || ec != std::errc() || ptr != last) {
        throw IngestionError("non-numeric cell '" + cell + "'", path, line_no, table.header[j]);
      }
      if (!std::isfinite(row[j])) {
        throw IngestionError("non-finite cell '" + cell + "'", path, line_no, table.header[j]);
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw IngestionError("no data rows", path);
  return table;
}

std::string FormatDouble(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void Write(const std::string& path, const std::vector<std::string>& names,
           const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw DimensionError("csv::Write: names/columns mismatch");
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != n) throw DimensionError("csv::Write: ragged columns");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      out << (j ? "," : "") << FormatDouble(columns[j][i]);
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace balw::csv
