#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace umblt {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool line = false;  // markers only when false
};

// Self-contained SVG with linear axes, tick labels and a legend. Non-finite
// points are skipped.
void write_svg_plot(std::ostream& out, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace umblt
