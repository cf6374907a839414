#pragma once

#include <string>
#include <vector>

namespace pift {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct SvgPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<SvgSeries> series;
};

// Plain line chart; non-finite points (and nonpositive ones on a log axis) are skipped.
std::string render_svg(const SvgPlot& plot);
void write_svg(const std::string& path, const SvgPlot& plot);

}  // namespace pift
