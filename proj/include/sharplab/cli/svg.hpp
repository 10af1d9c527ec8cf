#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sharplab::cli {

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional shaded band (same length as x), drawn as a polygon.
  std::vector<double> lower;
  std::vector<double> upper;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<ChartSeries> series;
  /// Extra text lines under the title (fitted slopes, metadata).
  std::vector<std::string> notes;
};

/// Self-contained SVG: one <path> per series, bands as <polygon>, axes as
/// <line>. Points that cannot be shown on a log axis are skipped.
std::string render_svg(const LineChart& chart);
void write_svg(const std::filesystem::path& path, const LineChart& chart);

std::string xml_escape(const std::string& text);

}  // namespace sharplab::cli
