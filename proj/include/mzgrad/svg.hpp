#pragma once

#include <string>
#include <vector>

// Small deterministic SVG plotter for the toolkit's figures. All geometry is
// emitted with fixed-precision formatting, so identical figures render to
// byte-identical files on every platform.

namespace mzgrad::svg {

struct Series {
  enum class Kind { scatter, line, errorbar };
  Kind kind = Kind::line;
  std::vector<double> x, y;
  std::vector<double> yerr;  // only read for errorbar series
  std::string label;         // legend entry; empty = omitted from legend
};

struct Figure {
  std::string title, xlabel, ylabel;
  int width = 720, height = 520;
  std::vector<Series> series;
};

// parametric fringe ellipse (z1, z2) = (c1 + v1 sin u, c2 + v2 sin(u + dphi))
Series ellipse_series(double c1, double c2, double v1, double v2, double delta_phi,
                      int n_points = 181, const std::string& label = "");

std::string render(const Figure& figure);
void write_svg(const std::string& path, const Figure& figure);

}  // namespace mzgrad::svg
