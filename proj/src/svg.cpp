#include "mzgrad/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mzgrad/units.hpp"

namespace mzgrad::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  // ticks come from nice-number steps; %g trims the float noise
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  bool seen = false;
  void add(double v) {
    if (!std::isfinite(v)) return;
    if (!seen) {
      lo = hi = v;
      seen = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (!seen) {
      lo = 0.0;
      hi = 1.0;
      return;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double margin = 0.05 * (hi - lo);
      lo -= margin;
      hi += margin;
    }
  }
};

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  double nice = 10.0;
  if (frac <= 1.5)
    nice = 1.0;
  else if (frac <= 3.5)
    nice = 2.0;
  else if (frac <= 7.5)
    nice = 5.0;
  return nice * mag;
}

void escape_into(std::string& out, const std::string& text) {
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
}

}  // namespace

Series ellipse_series(double c1, double c2, double v1, double v2, double delta_phi,
                      int n_points, const std::string& label) {
  if (n_points < 2) throw std::invalid_argument("ellipse series: need n_points >= 2");
  Series s;
  s.kind = Series::Kind::line;
  s.label = label;
  s.x.reserve(n_points);
  s.y.reserve(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double u = units::two_pi * i / (n_points - 1);
    s.x.push_back(c1 + v1 * std::sin(u));
    s.y.push_back(c2 + v2 * std::sin(u + delta_phi));
  }
  return s;
}

std::string render(const Figure& figure) {
  for (const auto& s : figure.series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("svg series: x and y lengths differ");
    if (s.kind == Series::Kind::errorbar && s.yerr.size() != s.y.size())
      throw std::invalid_argument("svg series: errorbar needs yerr per point");
  }
  const double margin_l = 70.0, margin_r = 20.0, margin_t = 42.0, margin_b = 56.0;
  const double w = figure.width, h = figure.height;
  const double plot_w = w - margin_l - margin_r;
  const double plot_h = h - margin_t - margin_b;

  Range rx, ry;
  bool any_points = false;
  for (const auto& s : figure.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      any_points = true;
      rx.add(s.x[i]);
      ry.add(s.y[i]);
      if (s.kind == Series::Kind::errorbar) {
        ry.add(s.y[i] - s.yerr[i]);
        ry.add(s.y[i] + s.yerr[i]);
      }
    }
  rx.pad();
  ry.pad();
  const auto px = [&](double x) { return margin_l + (x - rx.lo) / (rx.hi - rx.lo) * plot_w; };
  const auto py = [&](double y) { return margin_t + (ry.hi - y) / (ry.hi - ry.lo) * plot_h; };

  std::string out;
  out.reserve(1 << 14);
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(figure.width) +
         "\" height=\"" + std::to_string(figure.height) + "\" viewBox=\"0 0 " +
         std::to_string(figure.width) + " " + std::to_string(figure.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // frame
  out += "<rect x=\"" + fmt(margin_l) + "\" y=\"" + fmt(margin_t) + "\" width=\"" + fmt(plot_w) +
         "\" height=\"" + fmt(plot_h) + "\" fill=\"none\" stroke=\"#333333\"/>\n";

  // ticks and grid
  const double sx = nice_step(rx.hi - rx.lo);
  for (double t = std::ceil(rx.lo / sx) * sx; t <= rx.hi + 1e-12 * sx; t += sx) {
    const double X = px(t);
    out += "<line x1=\"" + fmt(X) + "\" y1=\"" + fmt(margin_t + plot_h) + "\" x2=\"" + fmt(X) +
           "\" y2=\"" + fmt(margin_t + plot_h + 5) + "\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + fmt(X) + "\" y=\"" + fmt(margin_t + plot_h + 18) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
           fmt_tick(t) + "</text>\n";
  }
  const double sy = nice_step(ry.hi - ry.lo);
  for (double t = std::ceil(ry.lo / sy) * sy; t <= ry.hi + 1e-12 * sy; t += sy) {
    const double Y = py(t);
    out += "<line x1=\"" + fmt(margin_l - 5) + "\" y1=\"" + fmt(Y) + "\" x2=\"" + fmt(margin_l) +
           "\" y2=\"" + fmt(Y) + "\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + fmt(margin_l - 8) + "\" y=\"" + fmt(Y + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" + fmt_tick(t) +
           "</text>\n";
  }

  // series
  int color_idx = 0;
  for (const auto& s : figure.series) {
    const std::string color = kPalette[color_idx % kPaletteSize];
    ++color_idx;
    switch (s.kind) {
      case Series::Kind::line: {
        if (s.x.empty()) break;
        out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (i) out += ' ';
          out += fmt(px(s.x[i])) + "," + fmt(py(s.y[i]));
        }
        out += "\"/>\n";
        break;
      }
      case Series::Kind::scatter: {
        for (std::size_t i = 0; i < s.x.size(); ++i)
          out += "<circle cx=\"" + fmt(px(s.x[i])) + "\" cy=\"" + fmt(py(s.y[i])) +
                 "\" r=\"2.5\" fill=\"" + color + "\" fill-opacity=\"0.75\"/>\n";
        break;
      }
      case Series::Kind::errorbar: {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          const double X = px(s.x[i]);
          const double Ylo = py(s.y[i] - s.yerr[i]), Yhi = py(s.y[i] + s.yerr[i]);
          out += "<line x1=\"" + fmt(X) + "\" y1=\"" + fmt(Ylo) + "\" x2=\"" + fmt(X) +
                 "\" y2=\"" + fmt(Yhi) + "\" stroke=\"" + color + "\"/>\n";
          out += "<line x1=\"" + fmt(X - 3) + "\" y1=\"" + fmt(Ylo) + "\" x2=\"" + fmt(X + 3) +
                 "\" y2=\"" + fmt(Ylo) + "\" stroke=\"" + color + "\"/>\n";
          out += "<line x1=\"" + fmt(X - 3) + "\" y1=\"" + fmt(Yhi) + "\" x2=\"" + fmt(X + 3) +
                 "\" y2=\"" + fmt(Yhi) + "\" stroke=\"" + color + "\"/>\n";
          out += "<circle cx=\"" + fmt(X) + "\" cy=\"" + fmt(py(s.y[i])) + "\" r=\"3\" fill=\"" +
                 color + "\"/>\n";
        }
        break;
      }
    }
  }

  if (!any_points) {
    out += "<text x=\"" + fmt(margin_l + 0.5 * plot_w) + "\" y=\"" + fmt(margin_t + 0.5 * plot_h) +
           "\" font-family=\"sans-serif\" font-size=\"14\" fill=\"#888888\" "
           "text-anchor=\"middle\">no data</text>\n";
  }

  // legend
  int legend_row = 0;
  color_idx = 0;
  for (const auto& s : figure.series) {
    const std::string color = kPalette[color_idx % kPaletteSize];
    ++color_idx;
    if (s.label.empty()) continue;
    const double Y = margin_t + 14 + 16.0 * legend_row;
    const double X = margin_l + plot_w - 130;
    out += "<rect x=\"" + fmt(X) + "\" y=\"" + fmt(Y - 8) +
           "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    out += "<text x=\"" + fmt(X + 15) + "\" y=\"" + fmt(Y + 1) +
           "\" font-family=\"sans-serif\" font-size=\"12\">";
    escape_into(out, s.label);
    out += "</text>\n";
    ++legend_row;
  }

  // labels
  if (!figure.title.empty()) {
    out += "<text x=\"" + fmt(margin_l + 0.5 * plot_w) + "\" y=\"24\" font-family=\"sans-serif\" "
           "font-size=\"15\" text-anchor=\"middle\">";
    escape_into(out, figure.title);
    out += "</text>\n";
  }
  if (!figure.xlabel.empty()) {
    out += "<text x=\"" + fmt(margin_l + 0.5 * plot_w) + "\" y=\"" + fmt(h - 14) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">";
    escape_into(out, figure.xlabel);
    out += "</text>\n";
  }
  if (!figure.ylabel.empty()) {
    out += "<text x=\"20\" y=\"" + fmt(margin_t + 0.5 * plot_h) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 20 " +
           fmt(margin_t + 0.5 * plot_h) + ")\">";
    escape_into(out, figure.ylabel);
    out += "</text>\n";
  }

  out += "</svg>\n";
  return out;
}

void write_svg(const std::string& path, const Figure& figure) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << render(figure);
}

}  // namespace mzgrad::svg
