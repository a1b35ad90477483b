#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mzgrad/exec.hpp"
#include "mzgrad/interferometer.hpp"

// Statistical pipeline for paired imbalance data: fringe calibration, the
// ellipse relation, joint maximum-likelihood estimation of the differential
// phase and its shot-to-shot spread, and parametric-bootstrap errors.

namespace mzgrad::estimate {

struct JointSamples {
  std::vector<std::pair<double, double>> pairs;  // (z1, z2), each in [-1, 1]
  std::size_t size() const { return pairs.size(); }
};

struct Calibration {
  double c1 = 0.0, c2 = 0.0;  // fringe offsets
  double v1 = 1.0, v2 = 1.0;  // visibilities
};

struct EstimateResult {
  double delta_phi = 0.0;  // rad, canonical branch in [0, pi]
  double sigma = 0.0;      // rad
  double se_delta_phi = 0.0;
  double se_sigma = 0.0;
  double log_likelihood_at_max = 0.0;
  int m = 0;
  int n_bootstrap = 0;
  int n_bootstrap_failed = 0;
  // the +-delta_phi branches of the likelihood are degenerate; set when the
  // mirrored branch is a distinct point within one log-unit
  bool ambiguity_flag = false;
  bool converged = false;
  bool bootstrap_warning = false;  // more than 10% of resamples failed to refit
  Calibration calibration;
};

struct MleOptions {
  double sigma_floor = 1e-3;  // rad; avoids the singular sigma -> 0 density
  double sigma_ceil = 2.0;
  // coarse-grid search range; theta_lo/theta_hi may straddle any branch since
  // the likelihood is 2 pi periodic in delta_phi
  double theta_lo = -3.14159265358979323846;
  double theta_hi = 3.14159265358979323846;
  int n_theta = 61;
  int n_sigma = 41;
  int min_samples = 5;
  bool wrap_images = false;  // sum Gaussian images instead of nearest-image reduction
  int max_refine_iter = 300;
};

JointSamples joint_from_shots(const std::vector<interferometer::ShotPair>& shots);

// C_j = mean(z_j), V_j = max_k |z_j - C_j|. Throws std::domain_error when a
// channel is degenerate (zero visibility), std::invalid_argument for fewer
// than 5 samples or out-of-range values.
Calibration calibrate(const JointSamples& samples);

// z-tilde = (z - C)/V, clipped to |z| <= 1 - 1e-9 before any arcsin
JointSamples rescale(const JointSamples& samples, const Calibration& calib);

// left-hand side of the ellipse relation
// z1^2 + z2^2 - 2 z1 z2 cos(dphi) - sin^2(dphi)
double ellipse_residual(double z1_tilde, double z2_tilde, double delta_phi);

// joint density of one rescaled pair: four Gaussian branches in arcsin
// coordinates over the uniformly swept common phase. Nearest-image reduces
// each branch argument into (-pi, pi]; wrap_images sums the 2 pi images.
double likelihood_density(double z1_tilde, double z2_tilde, double delta_phi, double sigma,
                          bool wrap_images = false);

double log_likelihood(const JointSamples& samples_tilde, double delta_phi, double sigma,
                      bool wrap_images = false);

// deterministic coarse grid over (delta_phi, sigma) followed by Nelder-Mead
// refinement in (delta_phi, log sigma) to 1e-5
EstimateResult mle_fit(const JointSamples& samples, const Calibration& calib,
                       const MleOptions& options = {});

// parametric bootstrap: resample n_resamples datasets of size m from the
// fitted density, refit each with the same plug-in calibration, and report
// the standard deviations of the refitted parameters. Deterministic per seed;
// resamples may run in parallel with identical results.
EstimateResult bootstrap(const EstimateResult& result, const Calibration& calib, int m,
                         int n_resamples, std::uint64_t seed,
                         ExecPolicy policy = ExecPolicy::serial);

// generator behind the bootstrap: z_j = C_j + V_j sin(phi + [delta_phi]_j=2 + xi_j)
// with phi uniform on [0, 2 pi) and xi_j ~ N(0, sigma/sqrt(2)) per channel
JointSamples sample_joint(double delta_phi, double sigma, const Calibration& calib, int m,
                          std::uint64_t seed);

// structured text document with one `key: value` line per field
std::string format_result(const EstimateResult& result);
void write_result(const std::string& path, const EstimateResult& result);

// fitted fringe ellipse plus the band swept by delta_phi +- k sigma, as three
// polylines (branch 0 = fit, 1 = lower, 2 = upper); coverage 0.9 -> k = 1.645
void write_confidence_band_csv(const std::string& path, const EstimateResult& result,
                               int n_points = 181, double coverage = 0.9);

}  // namespace mzgrad::estimate
