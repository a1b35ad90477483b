#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mzgrad/csv.hpp"
#include "mzgrad/estimate.hpp"
#include "mzgrad/rng.hpp"
#include "mzgrad/units.hpp"

using namespace mzgrad;
using estimate::Calibration;
using estimate::EstimateResult;
using estimate::JointSamples;
using estimate::MleOptions;

namespace {

Calibration identity_calib() { return Calibration{0.0, 0.0, 1.0, 1.0}; }

// exact points on the fringe ellipse: z1 = sin u, z2 = sin(u + dphi)
JointSamples parametric(int m, double dphi, double u0 = 0.0) {
  JointSamples s;
  s.pairs.reserve(m);
  for (int k = 0; k < m; ++k) {
    const double u = u0 + units::two_pi * k / m;
    s.pairs.emplace_back(std::sin(u), std::sin(u + dphi));
  }
  return s;
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(units::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

// integral of the pair density over [-1,1]^2 via the substitution z = sin(a)
double density_mass(double dphi, double sigma, bool wrap, int n = 240) {
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a1 = 0.5 * units::pi * x[i];
    for (int j = 0; j < n; ++j) {
      const double a2 = 0.5 * units::pi * x[j];
      const double p = estimate::likelihood_density(std::sin(a1), std::sin(a2), dphi, sigma, wrap);
      total += w[i] * w[j] * p * std::cos(a1) * std::cos(a2);
    }
  }
  return total * 0.25 * units::pi * units::pi;
}

}  // namespace

TEST_CASE("calibration offsets and visibilities") {
  JointSamples s;
  s.pairs = {{-0.5, 0.1}, {0.0, 0.3}, {0.5, 0.5}, {0.25, 0.2}, {-0.25, 0.4}};
  const Calibration c = estimate::calibrate(s);
  CHECK(c.c1 == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(c.c2 == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(c.v1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.v2 == doctest::Approx(0.2).epsilon(1e-12));

  // recover offsets/visibilities of a dim, displaced fringe pair
  Calibration truth{-0.0387, -0.066, 0.89, 0.85};
  const JointSamples big = estimate::sample_joint(1.2, 0.05, truth, 5000, 77);
  const Calibration fit = estimate::calibrate(big);
  CHECK(std::abs(fit.c1 - truth.c1) < 0.02);
  CHECK(std::abs(fit.c2 - truth.c2) < 0.02);
  CHECK(std::abs(fit.v1 - truth.v1) < 0.03);
  CHECK(std::abs(fit.v2 - truth.v2) < 0.03);
}

TEST_CASE("calibration rejects degenerate or invalid input") {
  JointSamples flat;
  flat.pairs = {{0.2, 0.1}, {0.2, 0.3}, {0.2, 0.5}, {0.2, 0.2}, {0.2, 0.4}};
  CHECK_THROWS_AS((void)estimate::calibrate(flat), std::domain_error);

  JointSamples few;
  few.pairs = {{0.1, 0.2}, {0.3, 0.4}};
  CHECK_THROWS_AS((void)estimate::calibrate(few), std::invalid_argument);

  JointSamples out_of_range;
  out_of_range.pairs = {{0.0, 0.0}, {1.5, 0.0}, {0.2, 0.1}, {-0.2, 0.4}, {0.4, -0.3}};
  CHECK_THROWS_AS((void)estimate::calibrate(out_of_range), std::invalid_argument);
}

TEST_CASE("rescale centres, normalizes and clips") {
  JointSamples s;
  s.pairs = {{0.9, -0.2}, {-0.1, 0.6}, {0.4, 0.2}, {0.1, 0.0}, {0.3, 0.4}};
  const Calibration c{0.4, 0.2, 0.5, 0.4};
  const JointSamples t = estimate::rescale(s, c);
  CHECK(t.pairs[0].first == doctest::Approx(1.0 - 1e-9).epsilon(1e-12));  // clipped from 1.0
  CHECK(t.pairs[0].second == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(t.pairs[1].first == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(t.pairs[2].second == doctest::Approx(0.0).epsilon(1e-15));
  Calibration bad = c;
  bad.v2 = 0.0;
  CHECK_THROWS_AS((void)estimate::rescale(s, bad), std::domain_error);
}

TEST_CASE("noiseless parametric data satisfies the ellipse relation") {
  for (int i = 0; i < 20; ++i) {
    const double dphi = -units::pi + (i + 0.5) * units::two_pi / 20.0;
    const JointSamples s = parametric(100, dphi, 0.123);
    for (const auto& [z1, z2] : s.pairs)
      CHECK(std::abs(estimate::ellipse_residual(z1, z2, dphi)) < 1e-12);
  }
}

TEST_CASE("pair density integrates to one") {
  for (double sigma : {0.1, 0.3})
    for (double dphi : {0.5, 0.5 * units::pi, 2.5}) {
      CHECK(density_mass(dphi, sigma, false) == doctest::Approx(1.0).epsilon(1e-3));
      CHECK(density_mass(dphi, sigma, true) == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("density symmetries and image variant") {
  rng::Sequence gen(5, rng::Stream::noise, 9);
  for (int k = 0; k < 50; ++k) {
    const double z1 = gen.uniform(-0.999, 0.999);
    const double z2 = gen.uniform(-0.999, 0.999);
    const double th = gen.uniform(-units::pi, units::pi);
    const double sg = gen.uniform(0.05, 1.5);
    // swapping the channels mirrors the phase; the sign itself is unidentified
    CHECK(estimate::likelihood_density(z1, z2, th, sg) ==
          doctest::Approx(estimate::likelihood_density(z2, z1, -th, sg)).epsilon(1e-12));
    CHECK(estimate::likelihood_density(z1, z2, th, sg) ==
          doctest::Approx(estimate::likelihood_density(z1, z2, -th, sg)).epsilon(1e-12));
    // image summation only ever adds probability mass
    CHECK(estimate::likelihood_density(z1, z2, th, sg, true) >=
          estimate::likelihood_density(z1, z2, th, sg, false));
  }
  CHECK_THROWS_AS((void)estimate::likelihood_density(0.1, 0.2, 0.5, 0.0), std::domain_error);
}

TEST_CASE("log likelihood matches the pointwise density") {
  const JointSamples s = estimate::sample_joint(1.1, 0.25, identity_calib(), 9, 31);
  for (bool wrap : {false, true}) {
    double direct = 0.0;
    for (const auto& [z1, z2] : s.pairs)
      direct += std::log(estimate::likelihood_density(z1, z2, 0.8, 0.25, wrap));
    CHECK(estimate::log_likelihood(s, 0.8, 0.25, wrap) ==
          doctest::Approx(direct).epsilon(1e-9));
  }
  // exact mirror symmetry of the whole surface
  CHECK(estimate::log_likelihood(s, 0.8, 0.25) == estimate::log_likelihood(s, -0.8, 0.25));
  CHECK_THROWS_AS((void)estimate::log_likelihood(s, 0.8, -0.1), std::domain_error);
}

TEST_CASE("mle recovers the phase of noiseless ellipses") {
  for (int i = 0; i < 20; ++i) {
    const double dphi = -units::pi + (i + 0.5) * units::two_pi / 20.0;
    const JointSamples s = parametric(100, dphi, 0.123);
    // the parametric sweep is already in tilde coordinates
    const EstimateResult r = estimate::mle_fit(s, identity_calib());
    CHECK(std::abs(r.delta_phi - std::abs(dphi)) < 1e-3);
    CHECK(r.sigma <= 1e-3 + 1e-12);  // pinned at the floor
    CHECK(r.converged);
    // the full pipeline re-estimates the calibration from the data; the
    // slight visibility shrink costs a small apparent spread but not accuracy
    const EstimateResult piped = estimate::mle_fit(s, estimate::calibrate(s));
    CHECK(std::abs(piped.delta_phi - std::abs(dphi)) < 1e-3);
    CHECK(piped.sigma < 0.01);
  }
}

TEST_CASE("mle flags the mirrored-branch ambiguity") {
  const JointSamples s = parametric(80, 1.3);
  const EstimateResult r = estimate::mle_fit(s, estimate::calibrate(s));
  CHECK(r.ambiguity_flag);
  // a closed ellipse collapses to a line at dphi = 0 where both branches meet
  const JointSamples line = parametric(80, 0.0);
  const EstimateResult r0 = estimate::mle_fit(line, estimate::calibrate(line));
  CHECK(r0.delta_phi < 1e-4);
  CHECK_FALSE(r0.ambiguity_flag);
}

TEST_CASE("round trip with shot noise and bootstrap errors") {
  const Calibration truth{-0.04, -0.07, 0.89, 0.85};
  const double dphi = 1.0, sigma = 0.2;
  const JointSamples data = estimate::sample_joint(dphi, sigma, truth, 1000, 424242);
  const Calibration cal = estimate::calibrate(data);
  EstimateResult fit = estimate::mle_fit(data, cal);
  CHECK(fit.converged);
  fit = estimate::bootstrap(fit, cal, 1000, 100, 99);
  CHECK(fit.n_bootstrap == 100);
  CHECK(fit.n_bootstrap_failed == 0);
  CHECK_FALSE(fit.bootstrap_warning);
  CHECK(fit.se_delta_phi > 0.002);
  CHECK(fit.se_delta_phi < 0.06);
  CHECK(std::abs(fit.delta_phi - dphi) < 3.0 * fit.se_delta_phi);
  CHECK(std::abs(fit.sigma - sigma) < 3.0 * fit.se_sigma);
}

TEST_CASE("bootstrap errors shrink with sample size") {
  const Calibration truth{0.0, 0.0, 0.9, 0.9};
  auto se_at = [&](int m, std::uint64_t seed) {
    const JointSamples data = estimate::sample_joint(0.9, 0.25, truth, m, seed);
    const Calibration cal = estimate::calibrate(data);
    EstimateResult fit = estimate::mle_fit(data, cal);
    fit = estimate::bootstrap(fit, cal, m, 150, seed + 1);
    return fit.se_delta_phi;
  };
  const double se30 = se_at(30, 1001);
  const double se120 = se_at(120, 2002);
  CHECK(se30 > se120);
  CHECK(se30 / se120 == doctest::Approx(2.0).epsilon(0.2));  // ~ sqrt(120/30)
}

TEST_CASE("vanishing spread drives the bootstrap errors to zero") {
  const Calibration cal = identity_calib();
  const JointSamples data = estimate::sample_joint(0.8, 0.0, cal, 200, 7);
  for (const auto& [z1, z2] : data.pairs)
    CHECK(std::abs(estimate::ellipse_residual(z1, z2, 0.8)) < 1e-12);
  EstimateResult fit = estimate::mle_fit(data, cal);
  CHECK(std::abs(fit.delta_phi - 0.8) < 2e-3);
  CHECK(fit.sigma <= 1e-3 + 1e-12);
  fit = estimate::bootstrap(fit, cal, 200, 100, 11);
  CHECK(fit.se_delta_phi < 1e-3);
  CHECK(fit.se_sigma < 1e-3);
}

TEST_CASE("estimate is invariant under sample order and channel swap") {
  const JointSamples data = estimate::sample_joint(1.4, 0.15, identity_calib(), 300, 55);
  const Calibration cal = estimate::calibrate(data);
  const EstimateResult base = estimate::mle_fit(data, cal);

  JointSamples reversed = data;
  std::reverse(reversed.pairs.begin(), reversed.pairs.end());
  const EstimateResult rev = estimate::mle_fit(reversed, estimate::calibrate(reversed));
  CHECK(rev.delta_phi == doctest::Approx(base.delta_phi).epsilon(1e-6));
  CHECK(rev.sigma == doctest::Approx(base.sigma).epsilon(1e-6));

  JointSamples swapped = data;
  for (auto& p : swapped.pairs) std::swap(p.first, p.second);
  const Calibration cs = estimate::calibrate(swapped);
  CHECK(cs.c1 == cal.c2);
  CHECK(cs.v1 == cal.v2);
  // swapping negates the phase, which folds back onto the canonical branch
  const EstimateResult swp = estimate::mle_fit(swapped, cs);
  CHECK(swp.delta_phi == base.delta_phi);
  CHECK(swp.sigma == base.sigma);
}

TEST_CASE("bootstrap is deterministic and policy independent") {
  const JointSamples data = estimate::sample_joint(0.6, 0.2, identity_calib(), 60, 13);
  const Calibration cal = estimate::calibrate(data);
  const EstimateResult fit = estimate::mle_fit(data, cal);
  const EstimateResult a = estimate::bootstrap(fit, cal, 60, 100, 17, ExecPolicy::serial);
  const EstimateResult b = estimate::bootstrap(fit, cal, 60, 100, 17, ExecPolicy::parallel);
  CHECK(a.se_delta_phi == b.se_delta_phi);
  CHECK(a.se_sigma == b.se_sigma);
  CHECK(a.n_bootstrap_failed == b.n_bootstrap_failed);
  const EstimateResult c = estimate::bootstrap(fit, cal, 60, 100, 18, ExecPolicy::serial);
  CHECK(c.se_delta_phi != a.se_delta_phi);
}

TEST_CASE("input validation across the estimation api") {
  const JointSamples data = estimate::sample_joint(0.5, 0.1, identity_calib(), 50, 3);
  const Calibration cal = estimate::calibrate(data);
  JointSamples tiny;
  tiny.pairs = {{0.1, 0.2}, {0.3, 0.1}, {-0.2, 0.4}};
  CHECK_THROWS_AS((void)estimate::mle_fit(tiny, cal), std::invalid_argument);
  Calibration degenerate = cal;
  degenerate.v1 = 0.0;
  CHECK_THROWS_AS((void)estimate::mle_fit(data, degenerate), std::domain_error);
  MleOptions bad;
  bad.sigma_floor = 0.5;
  bad.sigma_ceil = 0.1;
  CHECK_THROWS_AS((void)estimate::mle_fit(data, cal, bad), std::invalid_argument);
  MleOptions coarse;
  coarse.n_theta = 3;
  CHECK_THROWS_AS((void)estimate::mle_fit(data, cal, coarse), std::invalid_argument);
  const EstimateResult fit = estimate::mle_fit(data, cal);
  CHECK_THROWS_AS((void)estimate::bootstrap(fit, cal, 50, 50, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)estimate::bootstrap(fit, cal, 3, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)estimate::sample_joint(0.5, -0.1, cal, 10, 1), std::domain_error);
  CHECK_THROWS_AS((void)estimate::sample_joint(0.5, 0.1, cal, 0, 1), std::invalid_argument);
}

TEST_CASE("joint sampling is deterministic and respects the calibration") {
  const Calibration c{0.1, -0.2, 0.7, 0.6};
  const JointSamples a = estimate::sample_joint(1.3, 0.2, c, 500, 21);
  const JointSamples b = estimate::sample_joint(1.3, 0.2, c, 500, 21);
  REQUIRE(a.pairs.size() == 500);
  CHECK(a.pairs == b.pairs);
  double m1 = 0.0, lo1 = 1.0, hi1 = -1.0;
  for (const auto& [z1, z2] : a.pairs) {
    m1 += z1;
    lo1 = std::min(lo1, z1);
    hi1 = std::max(hi1, z1);
    CHECK(std::abs(z2 + 0.2) <= 0.6 + 1e-12);
  }
  CHECK(std::abs(m1 / 500.0 - 0.1) < 0.05);
  CHECK(lo1 == doctest::Approx(0.1 - 0.7).epsilon(0.01));
  CHECK(hi1 == doctest::Approx(0.1 + 0.7).epsilon(0.01));
}

TEST_CASE("result document carries the full fit in fixed order") {
  EstimateResult r;
  r.delta_phi = 1.25;
  r.sigma = 0.31;
  r.se_delta_phi = 0.011;
  r.se_sigma = 0.02;
  r.calibration = Calibration{-0.04, -0.07, 0.89, 0.85};
  r.m = 1000;
  r.n_bootstrap = 200;
  r.ambiguity_flag = true;
  const std::string doc = estimate::format_result(r);
  std::istringstream in(doc);
  std::string lines[11];
  for (auto& l : lines) REQUIRE(static_cast<bool>(std::getline(in, l)));
  CHECK(lines[0] == "delta_phi_rad: 1.25");
  CHECK(lines[1] == "sigma_rad: 0.31");
  CHECK(lines[2] == "se_delta_phi: 0.011");
  CHECK(lines[3] == "se_sigma: 0.02");
  CHECK(lines[4] == "c1: -0.04");
  CHECK(lines[5] == "c2: -0.07");
  CHECK(lines[6] == "v1: 0.89");
  CHECK(lines[7] == "v2: 0.85");
  CHECK(lines[8] == "m: 1000");
  CHECK(lines[9] == "n_bootstrap: 200");
  CHECK(lines[10] == "ambiguity_flag: true");

  const std::string path = (std::filesystem::temp_directory_path() / "fit_result.txt").string();
  estimate::write_result(path, r);
  std::ifstream back(path);
  std::stringstream buf;
  buf << back.rdbuf();
  CHECK(buf.str() == doc);
  std::filesystem::remove(path);
}

TEST_CASE("confidence band file brackets the fitted ellipse") {
  EstimateResult r;
  r.delta_phi = 0.9;
  r.sigma = 0.2;
  r.calibration = Calibration{0.05, -0.1, 0.8, 0.75};
  const std::string path = (std::filesystem::temp_directory_path() / "band.csv").string();
  estimate::write_confidence_band_csv(path, r, 61, 0.9);
  const csv::Table t = csv::read(path);
  REQUIRE(t.rows.size() == 3 * 61);
  REQUIRE(t.header == std::vector<std::string>{"branch", "u", "z1", "z2"});
  const int bcol = t.column("branch"), ucol = t.column("u");
  const int z1col = t.column("z1"), z2col = t.column("z2");
  // branch 0 traces the fit itself
  CHECK(t.rows[0][bcol] == 0.0);
  CHECK(t.rows[0][ucol] == 0.0);
  CHECK(t.rows[0][z1col] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(t.rows[0][z2col] == doctest::Approx(-0.1 + 0.75 * std::sin(0.9)).epsilon(1e-12));
  // the two band edges straddle the fit phase by the same margin
  const double lo = t.rows[61][z2col], hi = t.rows[2 * 61][z2col];
  CHECK(lo == doctest::Approx(-0.1 + 0.75 * std::sin(0.9 - 1.6448536269514722 * 0.2))
                  .epsilon(1e-9));
  CHECK(hi == doctest::Approx(-0.1 + 0.75 * std::sin(0.9 + 1.6448536269514722 * 0.2))
                  .epsilon(1e-9));
  CHECK_THROWS_AS(estimate::write_confidence_band_csv(path, r, 1, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(estimate::write_confidence_band_csv(path, r, 61, 1.5), std::invalid_argument);
  std::filesystem::remove(path);
}

TEST_CASE("one sigma bootstrap intervals cover at the expected rate") {
  // self-consistency of the bootstrap at small m and known calibration: the
  // +-1 SE interval should cover the truth in a band around the nominal 68%
  const double dphi = 1.0, sigma = 0.2;
  const int reps = 500, m = 30;
  const Calibration cal = identity_calib();
  int covered = 0;
  for (int rep = 0; rep < reps; ++rep) {
    const JointSamples data = estimate::sample_joint(dphi, sigma, cal, m, 0xC0FFEE + rep);
    EstimateResult fit = estimate::mle_fit(data, cal);
    fit = estimate::bootstrap(fit, cal, m, 100, 0xB00 + rep);
    if (std::abs(fit.delta_phi - dphi) <= fit.se_delta_phi) ++covered;
  }
  const double rate = static_cast<double>(covered) / reps;
  CHECK(rate >= 0.60);
  CHECK(rate <= 0.75);
}
