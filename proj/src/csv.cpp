#include "relstab/csv.hpp"

#include <cmath>
#include <cstdio>

#include "relstab/errors.hpp"
#include "relstab/keyvalue.hpp"

namespace relstab {

bool CsvTable::has_column(std::string_view name) const {
  for (const std::string& h : header)
    if (h == name) return true;
  return false;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("missing column '" + std::string(name) + "'");
}

const std::string& CsvTable::cell(std::size_t row, std::string_view name) const {
  return rows.at(row).at(column(name));
}

double CsvTable::number(std::size_t row, std::string_view name) const {
  const std::string& text = cell(row, name);
  if (text == "nan") return std::nan("");
  return parse_number<double>(name, text);
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::vector<std::string> lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front().empty())
    throw ConfigError("CSV has no header row");
  table.header = split(lines.front(), ',');
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> row = split(lines[i], ',');
    if (row.size() != table.header.size())
      throw ConfigError("CSV row " + std::to_string(i) + " has " +
                        std::to_string(row.size()) + " fields, header has " +
                        std::to_string(table.header.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string csv_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

}  // namespace relstab
