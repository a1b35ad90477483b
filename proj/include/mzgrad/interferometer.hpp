#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mzgrad/exec.hpp"
#include "mzgrad/twomode.hpp"

// Mach-Zehnder protocols built from the two-mode primitives: two
// interferometers run simultaneously with a shared common-mode phase, optional
// spin echo, one-axis twisting, and the analytic dephasing model.

namespace mzgrad::interferometer {

// chi(B) = chi_el_per_a0 * a(B)/a0 + chi_dd with a(B)/a0 = slope_a (B - b0);
// b_min is the field where the total interaction rate crosses zero.
struct FeshbachModel {
  double b_min_gauss = 350.45;
  double slope_a = 0.56;    // a0 per Gauss near the zero crossing
  double chi_dd = -0.01;    // rad/s, attractive dipolar term
};

// electronic interaction rate per unit scattering length (rad/s per a0) at
// the reference trap; scales with sqrt(wy wz) via lattice::chi_contact
inline constexpr double chi_el_per_a0 = 0.072;

double chi_of_b(const FeshbachModel& model, double b_gauss);
double a_of_b(const FeshbachModel& model, double b_gauss);  // scattering length, a0 units

struct PhaseLaw {
  double offset_rad = 0.0;
  double width_rad = 6.283185307179586476925287;  // uniform on [offset, offset + width)
};

struct NoiseConfig {
  double sigma_bs2 = 0.0;    // variance of the mean imbalance after the first splitter
  double sigma_tech = 0.0;   // rad, per-shot technical dephasing (differential std)
  PhaseLaw common_phase_law; // per-shot common-mode phase, shared by both interferometers
  std::uint64_t seed = 0;
};

struct SequenceConfig {
  int n_atoms = 100;             // per interferometer
  double t_interrogation = 0.0;  // s
  double epsilon = 0.0;          // rad/s, common energy mismatch
  double delta = 0.0;            // rad/s, differential energy mismatch
  double chi = 0.0;              // rad/s, one-axis-twisting rate
  bool echo = false;
  int n_echo_pulses = 0;
};

struct ShotPair {
  std::int64_t shot_id = 0;
  double z1 = 0.0;
  double z2 = 0.0;
};

void validate(const NoiseConfig& noise);
void validate(const SequenceConfig& seq);

// Gaussian std s of the first-splitter angle error such that
// Var(sin eta) = sigma_bs2 for eta ~ N(0, s^2).
double splitter_angle_std(double sigma_bs2);

double predicted_sigma(int n_atoms, double sigma_bs2, double chi_rad_per_s, double t_s,
                       double sigma_tech);

double delta_from_trap(double omega_rad_per_s, double d_m, double mass_kg);

class Gradiometer {
 public:
  Gradiometer(SequenceConfig seq, NoiseConfig noise);
  ShotPair run_shot(std::int64_t shot_id) const;
  std::vector<ShotPair> run(int n_shots, ExecPolicy policy = ExecPolicy::serial) const;
  // noiseless expectation values <z1>, <z2> propagated exactly (no sampling)
  std::pair<double, double> expectation() const;

 private:
  SequenceConfig seq_;
  NoiseConfig noise_;
  double angle_std_ = 0.0;
  twomode::XRotator splitter_;
};

ShotPair run_shot(const SequenceConfig& seq, const NoiseConfig& noise, std::int64_t shot_id);
std::vector<ShotPair> run_gradiometer(const SequenceConfig& seq, const NoiseConfig& noise,
                                      int n_shots, ExecPolicy policy = ExecPolicy::serial);
std::pair<double, double> run_expectation(const SequenceConfig& seq);

struct RabiPoint {
  double t_s = 0.0;
  double z1 = 0.0;
  double z2 = 0.0;
};

// mean imbalance of both interferometers under resonant tunneling,
// f_rabi = 2 * tunneling_hz, sampled with n_shots projective measurements
std::vector<RabiPoint> rabi_scan(int n_atoms, double tunneling_hz,
                                 const std::vector<double>& times_s, int n_shots,
                                 std::uint64_t seed);

void write_shots_csv(const std::string& path, const std::vector<ShotPair>& shots);
std::vector<ShotPair> read_shots_csv(const std::string& path);

}  // namespace mzgrad::interferometer
