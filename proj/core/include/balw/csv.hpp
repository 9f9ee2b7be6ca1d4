#pragma once

#include <map>
#include <string>
#include <vector>

namespace balw::csv {

/// A fully numeric CSV table with a header row.
struct Table {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of `name` in the header; throws IngestionError when absent.
  std::size_t Column(const std::string& name) const;
  bool HasColumn(const std::string& name) const;
};

/// Reads a comma-separated file. Every cell must parse as a finite double.
Table ReadNumeric(const std::string& path);

/// 17 significant digits, so values round-trip exactly through ReadNumeric.
std::string FormatDouble(double value);

/// Writes `columns` (name -> values, all the same length) in the given order.
void Write(const std::string& path, const std::vector<std::string>& names,
           const std::vector<std::vector<double>>& columns);

}  // namespace balw::csv
