#include "mzgrad/estimate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mzgrad/csv.hpp"
#include "mzgrad/rng.hpp"
#include "mzgrad/units.hpp"

namespace mzgrad::estimate {

namespace {

constexpr double kClip = 1.0 - 1e-9;
constexpr double kLog2Pi = 1.8378770664093454836;
// branch terms whose exponent exceeds the leading one by this much are below
// double precision and can be skipped
constexpr double kExpCut = 45.0;

double wrap_pi(double x) { return std::remainder(x, units::two_pi); }

void check_range(const JointSamples& samples) {
  for (std::size_t k = 0; k < samples.pairs.size(); ++k) {
    const auto& [z1, z2] = samples.pairs[k];
    if (!(std::abs(z1) <= 1.0) || !(std::abs(z2) <= 1.0))
      throw std::invalid_argument("joint sample " + std::to_string(k) +
                                  " outside [-1, 1]: z1=" + std::to_string(z1) +
                                  " z2=" + std::to_string(z2));
  }
}

// per-dataset quantities that do not depend on (delta_phi, sigma)
struct TildePrep {
  std::vector<double> s1;  // arcsin z1 - arcsin z2
  std::vector<double> s2;  // arcsin z1 + arcsin z2 - pi
  double jacobian = 0.0;   // sum_k -1/2 [log(1 - z1^2) + log(1 - z2^2)]
  int m = 0;
};

TildePrep prepare(const JointSamples& tilde) {
  TildePrep p;
  p.m = static_cast<int>(tilde.pairs.size());
  p.s1.resize(p.m);
  p.s2.resize(p.m);
  for (int k = 0; k < p.m; ++k) {
    const double z1 = std::clamp(tilde.pairs[k].first, -kClip, kClip);
    const double z2 = std::clamp(tilde.pairs[k].second, -kClip, kClip);
    const double a1 = std::asin(z1);
    const double a2 = std::asin(z2);
    p.s1[k] = wrap_pi(a1 - a2);
    p.s2[k] = wrap_pi(a1 + a2 - units::pi);
    p.jacobian -= 0.5 * (std::log1p(-z1 * z1) + std::log1p(-z2 * z2));
  }
  return p;
}

// Branch geometry of the likelihood at one value of delta_phi, shared across
// a whole sigma sweep: the smallest squared branch argument per sample plus
// the ascending gaps of the remaining branches.
struct ThetaSlice {
  std::vector<double> gaps;
  double sum_dmin2 = 0.0;
  int n_branch = 4;
};

void fill_slice(const TildePrep& p, double theta, bool wrap_images, ThetaSlice& out) {
  const int nb = wrap_images ? 28 : 4;
  out.n_branch = nb;
  out.gaps.resize(static_cast<std::size_t>(nb - 1) * p.m);
  out.sum_dmin2 = 0.0;
  double q[28];
  double* gaps = out.gaps.data();
  for (int k = 0; k < p.m; ++k) {
    const double base[4] = {wrap_pi(theta + p.s1[k]), wrap_pi(theta - p.s1[k]),
                            wrap_pi(theta - p.s2[k]), wrap_pi(theta + p.s2[k])};
    int n = 0;
    if (wrap_images) {
      for (double d : base)
        for (int img = -3; img <= 3; ++img) {
          const double t = d + units::two_pi * img;
          q[n++] = t * t;
        }
    } else {
      for (double d : base) q[n++] = d * d;
    }
    std::sort(q, q + n);
    out.sum_dmin2 += q[0];
    for (int i = 1; i < n; ++i) *gaps++ = q[i] - q[0];
  }
}

double loglik_from_slice(const TildePrep& p, const ThetaSlice& slice, double sigma) {
  const double c = 0.5 / (sigma * sigma);
  double total = p.m * (-1.5 * kLog2Pi - std::log(sigma)) + p.jacobian - slice.sum_dmin2 * c;
  const int ng = slice.n_branch - 1;
  const double* g = slice.gaps.data();
  for (int k = 0; k < p.m; ++k, g += ng) {
    double acc = 0.0;
    for (int i = 0; i < ng; ++i) {
      const double t = g[i] * c;
      if (t > kExpCut) break;  // gaps ascend, the rest are smaller still
      acc += std::exp(-t);
    }
    if (acc != 0.0) total += std::log1p(acc);
  }
  return total;
}

double normal_quantile(double q) {
  // Newton iteration on the standard normal CDF; q in (0, 1)
  double x = 0.0;
  for (int it = 0; it < 80; ++it) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(units::two_pi);
    const double step = (cdf - q) / pdf;
    x -= step;
    if (std::abs(step) < 1e-14) break;
  }
  return x;
}

void validate_options(const MleOptions& o) {
  if (!(o.sigma_floor > 0.0) || !(o.sigma_ceil > o.sigma_floor))
    throw std::invalid_argument("mle options: need 0 < sigma_floor < sigma_ceil");
  if (o.n_theta < 5 || o.n_sigma < 3)
    throw std::invalid_argument("mle options: grid too small (n_theta >= 5, n_sigma >= 3)");
  if (!(o.theta_hi > o.theta_lo))
    throw std::invalid_argument("mle options: need theta_lo < theta_hi");
  if (o.min_samples < 2) throw std::invalid_argument("mle options: min_samples >= 2");
}

}  // namespace

JointSamples joint_from_shots(const std::vector<interferometer::ShotPair>& shots) {
  JointSamples out;
  out.pairs.reserve(shots.size());
  for (const auto& s : shots) out.pairs.emplace_back(s.z1, s.z2);
  return out;
}

Calibration calibrate(const JointSamples& samples) {
  const std::size_t m = samples.pairs.size();
  if (m < 5)
    throw std::invalid_argument("calibrate: need at least 5 samples, got " + std::to_string(m));
  check_range(samples);
  Calibration c;
  double m1 = 0.0, m2 = 0.0;
  for (const auto& [z1, z2] : samples.pairs) {
    m1 += z1;
    m2 += z2;
  }
  c.c1 = m1 / static_cast<double>(m);
  c.c2 = m2 / static_cast<double>(m);
  double v1 = 0.0, v2 = 0.0;
  for (const auto& [z1, z2] : samples.pairs) {
    v1 = std::max(v1, std::abs(z1 - c.c1));
    v2 = std::max(v2, std::abs(z2 - c.c2));
  }
  if (v1 < 1e-15 || v2 < 1e-15)
    throw std::domain_error("calibrate: a channel has zero visibility (all values equal)");
  c.v1 = v1;
  c.v2 = v2;
  return c;
}

JointSamples rescale(const JointSamples& samples, const Calibration& calib) {
  if (!(calib.v1 > 0.0) || !(calib.v2 > 0.0))
    throw std::domain_error("rescale: calibration visibility must be positive");
  check_range(samples);
  JointSamples out;
  out.pairs.reserve(samples.pairs.size());
  for (const auto& [z1, z2] : samples.pairs)
    out.pairs.emplace_back(std::clamp((z1 - calib.c1) / calib.v1, -kClip, kClip),
                           std::clamp((z2 - calib.c2) / calib.v2, -kClip, kClip));
  return out;
}

double ellipse_residual(double z1_tilde, double z2_tilde, double delta_phi) {
  const double s = std::sin(delta_phi);
  return z1_tilde * z1_tilde + z2_tilde * z2_tilde -
         2.0 * z1_tilde * z2_tilde * std::cos(delta_phi) - s * s;
}

double likelihood_density(double z1_tilde, double z2_tilde, double delta_phi, double sigma,
                          bool wrap_images) {
  if (!(sigma > 0.0)) throw std::domain_error("likelihood: sigma must be positive");
  const double z1 = std::clamp(z1_tilde, -kClip, kClip);
  const double z2 = std::clamp(z2_tilde, -kClip, kClip);
  const double a1 = std::asin(z1);
  const double a2 = std::asin(z2);
  const double base[4] = {wrap_pi(delta_phi + a1 - a2), wrap_pi(delta_phi - a1 + a2),
                          wrap_pi(delta_phi - a1 - a2 + units::pi),
                          wrap_pi(delta_phi + a1 + a2 - units::pi)};
  const double c = 0.5 / (sigma * sigma);
  double sum = 0.0;
  for (double d : base) {
    if (wrap_images) {
      for (int img = -3; img <= 3; ++img) {
        const double t = d + units::two_pi * img;
        sum += std::exp(-t * t * c);
      }
    } else {
      sum += std::exp(-d * d * c);
    }
  }
  const double pref =
      std::exp(-1.5 * kLog2Pi) / (sigma * std::sqrt((1.0 - z1 * z1) * (1.0 - z2 * z2)));
  return pref * sum;
}

double log_likelihood(const JointSamples& samples_tilde, double delta_phi, double sigma,
                      bool wrap_images) {
  if (!(sigma > 0.0)) throw std::domain_error("log_likelihood: sigma must be positive");
  if (samples_tilde.pairs.empty()) throw std::invalid_argument("log_likelihood: no samples");
  const TildePrep prep = prepare(samples_tilde);
  ThetaSlice slice;
  fill_slice(prep, delta_phi, wrap_images, slice);
  return loglik_from_slice(prep, slice, sigma);
}

EstimateResult mle_fit(const JointSamples& samples, const Calibration& calib,
                       const MleOptions& options) {
  validate_options(options);
  if (static_cast<int>(samples.pairs.size()) < options.min_samples)
    throw std::invalid_argument("mle_fit: need at least " + std::to_string(options.min_samples) +
                                " samples, got " + std::to_string(samples.pairs.size()));
  if (!(calib.v1 > 0.0) || !(calib.v2 > 0.0))
    throw std::domain_error("mle_fit: calibration visibility must be positive");

  const JointSamples tilde = rescale(samples, calib);
  const TildePrep prep = prepare(tilde);
  ThetaSlice slice;

  // coarse deterministic grid
  const double dtheta = (options.theta_hi - options.theta_lo) / options.n_theta;
  const double log_ratio = std::log(options.sigma_ceil / options.sigma_floor);
  std::vector<double> sigmas(options.n_sigma);
  for (int k = 0; k < options.n_sigma; ++k)
    sigmas[k] = options.sigma_floor * std::exp(log_ratio * k / (options.n_sigma - 1));

  double best_theta = 0.0, best_sigma = sigmas[0];
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < options.n_theta; ++i) {
    const double theta = options.theta_lo + (i + 1) * dtheta;
    fill_slice(prep, theta, options.wrap_images, slice);
    for (int k = 0; k < options.n_sigma; ++k) {
      const double ll = loglik_from_slice(prep, slice, sigmas[k]);
      if (ll > best_ll) {
        best_ll = ll;
        best_theta = theta;
        best_sigma = sigmas[k];
      }
    }
  }

  // Nelder-Mead refinement in (delta_phi, log sigma)
  auto objective = [&](double theta, double u) {
    const double sg = std::clamp(std::exp(u), options.sigma_floor, options.sigma_ceil);
    fill_slice(prep, theta, options.wrap_images, slice);
    return -loglik_from_slice(prep, slice, sg);
  };
  struct Vertex {
    double theta, u, f;
  };
  const double du = log_ratio / (options.n_sigma - 1);
  std::array<Vertex, 3> v;
  v[0] = {best_theta, std::log(best_sigma), -best_ll};
  v[1] = {best_theta + 0.5 * dtheta, std::log(best_sigma), 0.0};
  v[2] = {best_theta, std::log(best_sigma) + 0.5 * du, 0.0};
  v[1].f = objective(v[1].theta, v[1].u);
  v[2].f = objective(v[2].theta, v[2].u);
  auto by_f = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  std::sort(v.begin(), v.end(), by_f);

  bool refined = false;
  for (int it = 0; it < options.max_refine_iter; ++it) {
    const double spread_t =
        std::max(std::abs(v[1].theta - v[0].theta), std::abs(v[2].theta - v[0].theta));
    const double spread_u = std::max(std::abs(v[1].u - v[0].u), std::abs(v[2].u - v[0].u));
    if (spread_t < 1e-5 && spread_u < 1e-5) {
      refined = true;
      break;
    }
    const double ct = 0.5 * (v[0].theta + v[1].theta);
    const double cu = 0.5 * (v[0].u + v[1].u);
    Vertex refl{ct + (ct - v[2].theta), cu + (cu - v[2].u), 0.0};
    refl.f = objective(refl.theta, refl.u);
    if (refl.f < v[0].f) {
      Vertex expd{ct + 2.0 * (ct - v[2].theta), cu + 2.0 * (cu - v[2].u), 0.0};
      expd.f = objective(expd.theta, expd.u);
      v[2] = expd.f < refl.f ? expd : refl;
    } else if (refl.f < v[1].f) {
      v[2] = refl;
    } else {
      Vertex cont{ct + 0.5 * (v[2].theta - ct), cu + 0.5 * (v[2].u - cu), 0.0};
      cont.f = objective(cont.theta, cont.u);
      if (cont.f < v[2].f) {
        v[2] = cont;
      } else {
        for (int j = 1; j < 3; ++j) {
          v[j].theta = v[0].theta + 0.5 * (v[j].theta - v[0].theta);
          v[j].u = v[0].u + 0.5 * (v[j].u - v[0].u);
          v[j].f = objective(v[j].theta, v[j].u);
        }
      }
    }
    std::sort(v.begin(), v.end(), by_f);
  }

  EstimateResult result;
  result.m = prep.m;
  result.calibration = calib;
  result.sigma = std::clamp(std::exp(v[0].u), options.sigma_floor, options.sigma_ceil);
  // the likelihood is exactly symmetric under delta_phi -> -delta_phi, so the
  // estimate is reported on the canonical branch [0, pi]
  result.delta_phi = std::abs(wrap_pi(v[0].theta));
  result.log_likelihood_at_max = -objective(result.delta_phi, std::log(result.sigma));
  const bool at_ceiling = result.sigma >= options.sigma_ceil * (1.0 - 1e-9);
  result.converged = refined && !at_ceiling;
  result.ambiguity_flag =
      result.delta_phi > 1e-6 && units::pi - result.delta_phi > 1e-6;
  return result;
}

JointSamples sample_joint(double delta_phi, double sigma, const Calibration& calib, int m,
                          std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_joint: need m >= 1");
  if (sigma < 0.0) throw std::domain_error("sample_joint: sigma must be non-negative");
  if (!(calib.v1 > 0.0) || !(calib.v2 > 0.0))
    throw std::domain_error("sample_joint: calibration visibility must be positive");
  rng::Sequence gen(seed, rng::Stream::noise, 0);
  const double s = sigma / std::sqrt(2.0);
  JointSamples out;
  out.pairs.reserve(m);
  for (int k = 0; k < m; ++k) {
    const double phi = gen.uniform(0.0, units::two_pi);
    const double x1 = s * gen.gaussian();
    const double x2 = s * gen.gaussian();
    out.pairs.emplace_back(std::clamp(calib.c1 + calib.v1 * std::sin(phi + x1), -1.0, 1.0),
                           std::clamp(calib.c2 + calib.v2 * std::sin(phi + delta_phi + x2),
                                      -1.0, 1.0));
  }
  return out;
}

EstimateResult bootstrap(const EstimateResult& result, const Calibration& calib, int m,
                         int n_resamples, std::uint64_t seed, ExecPolicy policy) {
  if (n_resamples < 100)
    throw std::invalid_argument("bootstrap: need at least 100 resamples, got " +
                                std::to_string(n_resamples));
  if (m < 5) throw std::invalid_argument("bootstrap: need m >= 5");
  if (!(result.sigma > 0.0)) throw std::domain_error("bootstrap: fit has sigma <= 0");

  // refits search a window around the parent estimate; the grid is coarse but
  // the refinement step is unconstrained in delta_phi, so resamples that land
  // outside still converge
  MleOptions ropt;
  ropt.theta_lo = result.delta_phi - 0.6;
  ropt.theta_hi = result.delta_phi + 0.6;
  ropt.n_theta = 25;
  ropt.sigma_floor = std::max(1e-3, result.sigma / 4.0);
  ropt.sigma_ceil = std::min(2.0, std::max(result.sigma * 4.0, 8.0 * ropt.sigma_floor));
  ropt.n_sigma = 17;
  ropt.min_samples = 5;

  std::vector<char> ok(n_resamples, 0);
  std::vector<double> th(n_resamples, 0.0), sg(n_resamples, 0.0);
  auto refit_one = [&](int r) {
    rng::Sequence child(seed, rng::Stream::bootstrap, static_cast<std::uint64_t>(r));
    const std::uint64_t child_seed = child.next_u64();
    try {
      const JointSamples data = sample_joint(result.delta_phi, result.sigma, calib, m, child_seed);
      const EstimateResult fit = mle_fit(data, calib, ropt);
      if (fit.converged) {
        ok[r] = 1;
        th[r] = fit.delta_phi;
        sg[r] = fit.sigma;
      }
    } catch (const std::exception&) {
      // counted as a failed resample below
    }
  };
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < n_resamples; ++r) refit_one(r);
  } else {
    for (int r = 0; r < n_resamples; ++r) refit_one(r);
  }

  int n_ok = 0;
  double mean_t = 0.0, mean_s = 0.0;
  for (int r = 0; r < n_resamples; ++r)
    if (ok[r]) {
      ++n_ok;
      mean_t += th[r];
      mean_s += sg[r];
    }
  if (n_ok < 2)
    throw std::runtime_error("bootstrap: fewer than 2 resamples refit successfully");
  mean_t /= n_ok;
  mean_s /= n_ok;
  double var_t = 0.0, var_s = 0.0;
  for (int r = 0; r < n_resamples; ++r)
    if (ok[r]) {
      var_t += (th[r] - mean_t) * (th[r] - mean_t);
      var_s += (sg[r] - mean_s) * (sg[r] - mean_s);
    }

  EstimateResult out = result;
  out.n_bootstrap = n_resamples;
  out.n_bootstrap_failed = n_resamples - n_ok;
  out.se_delta_phi = std::sqrt(var_t / (n_ok - 1));
  out.se_sigma = std::sqrt(var_s / (n_ok - 1));
  out.bootstrap_warning = 10 * out.n_bootstrap_failed > n_resamples;
  return out;
}

std::string format_result(const EstimateResult& result) {
  std::string doc;
  auto line = [&doc](const std::string& key, const std::string& value) {
    doc += key;
    doc += ": ";
    doc += value;
    doc += '\n';
  };
  line("delta_phi_rad", csv::format_double(result.delta_phi));
  line("sigma_rad", csv::format_double(result.sigma));
  line("se_delta_phi", csv::format_double(result.se_delta_phi));
  line("se_sigma", csv::format_double(result.se_sigma));
  line("c1", csv::format_double(result.calibration.c1));
  line("c2", csv::format_double(result.calibration.c2));
  line("v1", csv::format_double(result.calibration.v1));
  line("v2", csv::format_double(result.calibration.v2));
  line("m", std::to_string(result.m));
  line("n_bootstrap", std::to_string(result.n_bootstrap));
  line("ambiguity_flag", result.ambiguity_flag ? "true" : "false");
  return doc;
}

void write_result(const std::string& path, const EstimateResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << format_result(result);
}

void write_confidence_band_csv(const std::string& path, const EstimateResult& result,
                               int n_points, double coverage) {
  if (n_points < 2) throw std::invalid_argument("confidence band: need n_points >= 2");
  if (!(coverage > 0.0) || !(coverage < 1.0))
    throw std::invalid_argument("confidence band: coverage must lie in (0, 1)");
  const double k = normal_quantile(0.5 * (1.0 + coverage));
  const double phases[3] = {result.delta_phi, result.delta_phi - k * result.sigma,
                            result.delta_phi + k * result.sigma};
  const Calibration& c = result.calibration;
  std::vector<std::vector<double>> rows;
  rows.reserve(3 * n_points);
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < n_points; ++i) {
      const double u = units::two_pi * i / (n_points - 1);
      rows.push_back({static_cast<double>(b), u, c.c1 + c.v1 * std::sin(u),
                      c.c2 + c.v2 * std::sin(u + phases[b])});
    }
  csv::write(path, {"branch", "u", "z1", "z2"}, rows);
}

}  // namespace mzgrad::estimate
