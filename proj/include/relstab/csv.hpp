#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace relstab {

// Comma-delimited table with a mandatory header row. No quoting: none of the
// files this project writes contain commas inside fields.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool has_column(std::string_view name) const;
  // Throws ConfigError("missing column '<name>'") when absent.
  std::size_t column(std::string_view name) const;
  const std::string& cell(std::size_t row, std::string_view name) const;
  double number(std::size_t row, std::string_view name) const;
};

// Throws ConfigError on an empty input or rows whose width differs from the
// header.
CsvTable parse_csv(std::string_view text);

// Fixed-precision rendering used in every table this project writes, so
// outputs are byte-stable.
std::string csv_number(double value);

}  // namespace relstab
