#pragma once

// Static SVG line charts.

#include <string>
#include <vector>

namespace modaff::cli {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;   // points instead of a polyline
};

struct Chart {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
  bool legend = true;
};

std::string render_svg(const Chart& c, int width = 720, int height = 440);
void write_svg(const Chart& c, const std::string& path);

/// Round tick positions covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

}  // namespace modaff::cli
