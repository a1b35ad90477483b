#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "mzgrad/svg.hpp"

using namespace mzgrad;

namespace {

svg::Figure sample_figure() {
  svg::Figure fig;
  fig.title = "demo";
  fig.xlabel = "time (s)";
  fig.ylabel = "z";
  svg::Series line;
  line.kind = svg::Series::Kind::line;
  line.label = "trace";
  for (int i = 0; i <= 10; ++i) {
    line.x.push_back(0.1 * i);
    line.y.push_back(std::sin(0.6 * i));
  }
  fig.series.push_back(line);
  svg::Series dots;
  dots.kind = svg::Series::Kind::scatter;
  dots.label = "samples";
  dots.x = {0.0, 0.25, 0.5, 0.75};
  dots.y = {0.1, -0.2, 0.3, -0.4};
  fig.series.push_back(dots);
  return fig;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("rendering is deterministic") {
  const auto fig = sample_figure();
  const std::string a = svg::render(fig);
  const std::string b = svg::render(fig);
  CHECK(a == b);
  CHECK(a.find("<svg") != std::string::npos);
  CHECK(a.find("</svg>") != std::string::npos);
  CHECK(a.find("demo") != std::string::npos);
  CHECK(a.find("time (s)") != std::string::npos);

  const std::string path = "svg_test_out.svg";
  svg::write_svg(path, fig);
  CHECK(slurp(path) == a);
  std::remove(path.c_str());
}

TEST_CASE("special characters are escaped") {
  svg::Figure fig;
  fig.title = "a < b & c > d";
  const std::string out = svg::render(fig);
  CHECK(out.find("a &lt; b &amp; c &gt; d") != std::string::npos);
  CHECK(out.find("a < b") == std::string::npos);
}

TEST_CASE("empty figures render a no-data annotation") {
  svg::Figure fig;
  fig.title = "empty";
  const std::string out = svg::render(fig);
  CHECK(out.find("no data") != std::string::npos);
  CHECK(out.find("</svg>") != std::string::npos);

  // a series without points counts as no data too
  svg::Series s;
  s.kind = svg::Series::Kind::line;
  fig.series.push_back(s);
  CHECK(svg::render(fig).find("no data") != std::string::npos);
}

TEST_CASE("series validation") {
  svg::Figure fig;
  svg::Series s;
  s.kind = svg::Series::Kind::line;
  s.x = {0.0, 1.0};
  s.y = {0.0};
  fig.series.push_back(s);
  CHECK_THROWS_AS((void)svg::render(fig), std::invalid_argument);

  fig.series[0].y = {0.0, 1.0};
  CHECK_NOTHROW((void)svg::render(fig));

  fig.series[0].kind = svg::Series::Kind::errorbar;
  CHECK_THROWS_AS((void)svg::render(fig), std::invalid_argument);  // missing yerr
  fig.series[0].yerr = {0.1, 0.1};
  CHECK_NOTHROW((void)svg::render(fig));
}

TEST_CASE("errorbars and legends show up in the output") {
  svg::Figure fig;
  svg::Series s;
  s.kind = svg::Series::Kind::errorbar;
  s.label = "measurement";
  s.x = {1.0, 2.0, 3.0};
  s.y = {0.5, 0.7, 0.6};
  s.yerr = {0.05, 0.04, 0.06};
  fig.series.push_back(s);
  const std::string out = svg::render(fig);
  CHECK(out.find("measurement") != std::string::npos);
  CHECK(out.find("<line") != std::string::npos);    // error bars
  CHECK(out.find("<circle") != std::string::npos);  // markers
}

TEST_CASE("ellipse series traces the fringe locus") {
  const double c1 = -0.04, c2 = -0.07, v1 = 0.89, v2 = 0.85, dphi = 1.1;
  const auto s = svg::ellipse_series(c1, c2, v1, v2, dphi, 181, "fit");
  REQUIRE(s.x.size() == 181);
  REQUIRE(s.y.size() == 181);
  CHECK(s.kind == svg::Series::Kind::line);
  CHECK(s.label == "fit");
  const double c = std::cos(dphi), s2 = std::sin(dphi) * std::sin(dphi);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double a = (s.x[i] - c1) / v1;
    const double b = (s.y[i] - c2) / v2;
    worst = std::max(worst, std::abs(a * a + b * b - 2.0 * a * b * c - s2));
  }
  CHECK(worst < 1e-12);
  // closed loop: first and last points coincide
  CHECK(s.x.front() == doctest::Approx(s.x.back()).epsilon(1e-12));
  CHECK(s.y.front() == doctest::Approx(s.y.back()).epsilon(1e-12));
}
