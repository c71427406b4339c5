#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relstab/csv.hpp"

namespace relstab {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

struct Heatmap {
  std::string title;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<double> values;  // row-major; NaN cells drawn grey
};

// Plain-text SVG; byte-identical for identical input.
std::string render_line_svg(const LinePlot& plot);
std::string render_heatmap_svg(const Heatmap& map);

struct LinePlotSpec {
  std::string x;
  std::vector<std::string> y;  // one series per column...
  std::string series;          // ...or split one y column by this column
  std::vector<std::pair<std::string, std::string>> filters;  // column == value
  std::string title;
};

// Rows failing a filter are skipped; NaN points are dropped; series keep
// first-appearance order and points are sorted by x. Throws ConfigError
// naming any missing column or when no data rows remain.
LinePlot line_plot_from_csv(const CsvTable& table, const LinePlotSpec& spec);

// First column holds row labels, every other column is numeric.
Heatmap heatmap_from_csv(const CsvTable& table, const std::string& title);

}  // namespace relstab
