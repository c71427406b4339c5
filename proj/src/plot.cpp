#include "relstab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "relstab/errors.hpp"
#include "relstab/keyvalue.hpp"

namespace relstab {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) +
         "\" height=\"" + fmt(h) + "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect x=\"0\" y=\"0\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
         "\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s,
                 const char* anchor = "middle", const char* extra = "") {
  return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" text-anchor=\"" +
         anchor + "\"" + extra + ">" + escape(s) + "</text>\n";
}

std::pair<double, double> padded_range(double lo, double hi) {
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

}  // namespace

std::string render_line_svg(const LinePlot& plot) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const Series& s : plot.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  std::tie(xlo, xhi) = padded_range(xlo, xhi);
  std::tie(ylo, yhi) = padded_range(ylo, yhi);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xlo) / (xhi - xlo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - ylo) / (yhi - ylo) * ph; };

  std::string svg = header(kWidth, kHeight);
  svg += text(kWidth / 2, 22, plot.title, "middle", " font-size=\"14\"");
  svg += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" +
         fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xlo + (xhi - xlo) * i / 4.0;
    const double yv = ylo + (yhi - ylo) * i / 4.0;
    svg += "<line x1=\"" + fmt(px(xv)) + "\" y1=\"" + fmt(kTop + ph) +
           "\" x2=\"" + fmt(px(xv)) + "\" y2=\"" + fmt(kTop + ph + 5) +
           "\" stroke=\"black\"/>\n";
    svg += text(px(xv), kTop + ph + 18, tick_label(xv));
    svg += "<line x1=\"" + fmt(kLeft - 5) + "\" y1=\"" + fmt(py(yv)) +
           "\" x2=\"" + fmt(kLeft) + "\" y2=\"" + fmt(py(yv)) +
           "\" stroke=\"black\"/>\n";
    svg += text(kLeft - 8, py(yv) + 4, tick_label(yv), "end");
  }
  svg += text(kLeft + pw / 2, kHeight - 15, plot.x_label);
  svg += text(18, kTop + ph / 2, plot.y_label, "middle",
              (" transform=\"rotate(-90 18 " + fmt(kTop + ph / 2) + ")\"").c_str());

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const Series& s = plot.series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) points += ' ';
      points += fmt(px(s.x[i])) + "," + fmt(py(s.y[i]));
    }
    svg += "<polyline class=\"series\" fill=\"none\" stroke=\"" +
           std::string(color) + "\" stroke-width=\"2\" points=\"" + points +
           "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg += "<circle cx=\"" + fmt(px(s.x[i])) + "\" cy=\"" + fmt(py(s.y[i])) +
             "\" r=\"3\" fill=\"" + color + "\"/>\n";
    const double ly = kTop + 12 + 18 * static_cast<double>(si);
    svg += "<line x1=\"" + fmt(kLeft + pw + 12) + "\" y1=\"" + fmt(ly) +
           "\" x2=\"" + fmt(kLeft + pw + 32) + "\" y2=\"" + fmt(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += text(kLeft + pw + 38, ly + 4, s.name, "start");
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_heatmap_svg(const Heatmap& map) {
  const std::size_t rows = map.row_labels.size(), cols = map.col_labels.size();
  if (map.values.size() != rows * cols)
    throw InputError("heatmap value count does not match its labels");
  const double cell_w = 64, cell_h = 32, left = 110, top = 50;
  const double w = left + cell_w * static_cast<double>(cols) + 40;
  const double h = top + cell_h * static_cast<double>(rows) + 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : map.values)
    if (!std::isnan(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  std::string svg = header(w, h);
  svg += text(w / 2, 22, map.title, "middle", " font-size=\"14\"");
  for (std::size_t c = 0; c < cols; ++c)
    svg += text(left + cell_w * (static_cast<double>(c) + 0.5), top - 8,
                map.col_labels[c]);
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = top + cell_h * static_cast<double>(r);
    svg += text(left - 8, y + cell_h / 2 + 4, map.row_labels[r], "end");
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = map.values[r * cols + c];
      std::string fill = "#cccccc";
      if (!std::isnan(v)) {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 1.0;
        char buf[16];
        // White (low) to dark blue (high).
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                      static_cast<int>(std::lround(255 - 225 * t)),
                      static_cast<int>(std::lround(255 - 175 * t)),
                      static_cast<int>(std::lround(255 - 75 * t)));
        fill = buf;
      }
      const double x = left + cell_w * static_cast<double>(c);
      svg += "<rect class=\"cell\" x=\"" + fmt(x) + "\" y=\"" + fmt(y) +
             "\" width=\"" + fmt(cell_w) + "\" height=\"" + fmt(cell_h) +
             "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
      char label[32];
      std::snprintf(label, sizeof label, "%.3f", v);
      svg += text(x + cell_w / 2, y + cell_h / 2 + 4,
                  std::isnan(v) ? "nan" : label);
    }
  }
  svg += "</svg>\n";
  return svg;
}

LinePlot line_plot_from_csv(const CsvTable& table, const LinePlotSpec& spec) {
  const std::size_t xcol = table.column(spec.x);
  std::vector<std::size_t> ycols;
  for (const std::string& y : spec.y) ycols.push_back(table.column(y));
  if (ycols.empty()) throw ConfigError("line plot needs at least one y column");
  std::optional<std::size_t> scol;
  if (!spec.series.empty()) {
    if (ycols.size() != 1)
      throw ConfigError("a series column needs exactly one y column");
    scol = table.column(spec.series);
  }
  std::vector<std::pair<std::size_t, std::string>> filters;
  for (const auto& [col, value] : spec.filters)
    filters.emplace_back(table.column(col), value);

  LinePlot plot;
  plot.title = spec.title;
  plot.x_label = spec.x;
  plot.y_label = ycols.size() == 1 ? spec.y.front() : "value";
  auto series_for = [&](const std::string& name) -> Series& {
    for (Series& s : plot.series)
      if (s.name == name) return s;
    plot.series.push_back({name, {}, {}});
    return plot.series.back();
  };
  std::size_t used = 0;
  for (const auto& row : table.rows) {
    bool keep = true;
    for (const auto& [col, value] : filters) {
      if (row[col] == value) continue;
      // Numeric filters compare by value so "0.1" matches "0.10".
      try {
        keep = parse_number<double>("filter", row[col]) ==
               parse_number<double>("filter", value);
      } catch (const ConfigError&) {
        keep = false;
      }
      if (!keep) break;
    }
    if (!keep) continue;
    ++used;
    const double x = parse_number<double>(spec.x, row[xcol]);
    for (std::size_t k = 0; k < ycols.size(); ++k) {
      const std::string& cell = row[ycols[k]];
      if (cell == "nan") continue;
      const double y = parse_number<double>(spec.y[k], cell);
      Series& s = series_for(scol ? spec.series + "=" + row[*scol] : spec.y[k]);
      s.x.push_back(x);
      s.y.push_back(y);
    }
  }
  if (used == 0) throw ConfigError("no data rows to plot");
  for (Series& s : plot.series) {
    std::vector<std::size_t> idx(s.x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    Series sorted{s.name, {}, {}};
    for (std::size_t i : idx) {
      sorted.x.push_back(s.x[i]);
      sorted.y.push_back(s.y[i]);
    }
    s = std::move(sorted);
  }
  return plot;
}

Heatmap heatmap_from_csv(const CsvTable& table, const std::string& title) {
  if (table.header.size() < 2)
    throw ConfigError("heatmap CSV needs a label column and numeric columns");
  if (table.rows.empty()) throw ConfigError("no data rows to plot");
  Heatmap map;
  map.title = title;
  map.col_labels.assign(table.header.begin() + 1, table.header.end());
  for (const auto& row : table.rows) {
    map.row_labels.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c)
      map.values.push_back(row[c] == "nan"
                               ? std::nan("")
                               : parse_number<double>(table.header[c], row[c]));
  }
  return map;
}

}  // namespace relstab
