#include "mzgrad/interferometer.hpp"

#include <cmath>
#include <stdexcept>

#include "mzgrad/csv.hpp"
#include "mzgrad/rng.hpp"
#include "mzgrad/units.hpp"

namespace mzgrad::interferometer {

double a_of_b(const FeshbachModel& model, double b_gauss) {
  if (!(model.slope_a > 0.0))
    throw std::invalid_argument("FeshbachModel: slope_a must be positive");
  // scattering length at b_min cancels the dipolar term exactly
  const double a_zc = -model.chi_dd / chi_el_per_a0;
  return model.slope_a * (b_gauss - model.b_min_gauss) + a_zc;
}

double chi_of_b(const FeshbachModel& model, double b_gauss) {
  return chi_el_per_a0 * a_of_b(model, b_gauss) + model.chi_dd;
}

void validate(const NoiseConfig& noise) {
  if (noise.sigma_bs2 < 0.0 || noise.sigma_bs2 >= 0.5)
    throw std::invalid_argument("NoiseConfig: sigma_bs2 must lie in [0, 0.5)");
  if (noise.sigma_tech < 0.0)
    throw std::invalid_argument("NoiseConfig: sigma_tech must be non-negative");
  if (noise.common_phase_law.width_rad < 0.0)
    throw std::invalid_argument("NoiseConfig: phase-law width must be non-negative");
}

void validate(const SequenceConfig& seq) {
  if (seq.n_atoms < 1) throw std::invalid_argument("SequenceConfig: need at least one atom");
  if (seq.t_interrogation < 0.0)
    throw std::invalid_argument("SequenceConfig: interrogation time must be non-negative");
  if (seq.echo) {
    if (seq.n_echo_pulses < 1)
      throw std::invalid_argument("SequenceConfig: echo requires at least one pi pulse");
  } else if (seq.n_echo_pulses != 0) {
    throw std::invalid_argument("SequenceConfig: n_echo_pulses must be 0 without echo");
  }
}

double splitter_angle_std(double sigma_bs2) {
  if (sigma_bs2 < 0.0 || sigma_bs2 >= 0.5)
    throw std::invalid_argument("splitter_angle_std: sigma_bs2 must lie in [0, 0.5)");
  if (sigma_bs2 == 0.0) return 0.0;
  // Var(sin eta) = (1 - exp(-2 s^2)) / 2 for eta ~ N(0, s^2)
  return std::sqrt(-0.5 * std::log1p(-2.0 * sigma_bs2));
}

double predicted_sigma(int n_atoms, double sigma_bs2, double chi_rad_per_s, double t_s,
                       double sigma_tech) {
  if (n_atoms < 1) throw std::invalid_argument("predicted_sigma: need at least one atom");
  if (sigma_bs2 < 0.0 || t_s < 0.0 || sigma_tech < 0.0)
    throw std::invalid_argument("predicted_sigma: noise parameters must be non-negative");
  const double n = n_atoms;
  const double ct = chi_rad_per_s * t_s;
  const double var = 2.0 / n * (1.0 + sigma_bs2) + 2.0 * n * (1.0 + n * sigma_bs2) * ct * ct +
                     sigma_tech * sigma_tech;
  return std::sqrt(var);
}

double delta_from_trap(double omega_rad_per_s, double d_m, double mass_kg) {
  if (omega_rad_per_s < 0.0 || d_m < 0.0 || !(mass_kg > 0.0))
    throw std::invalid_argument("delta_from_trap: arguments must be positive");
  return mass_kg * omega_rad_per_s * omega_rad_per_s * d_m * d_m / units::hbar;
}

namespace {

// CPMG segment weights 1/2n, 1/n, ..., 1/n, 1/2n; a single full-length
// segment when there is no echo
std::vector<double> cpmg_weights(bool echo, int n_pulses) {
  if (!echo) return {1.0};
  std::vector<double> w(n_pulses + 1, 1.0 / n_pulses);
  w.front() = w.back() = 0.5 / n_pulses;
  return w;
}

// phase accumulation with a pi pulse between consecutive segments; diagonal
// phases commute with the twisting block, so chi is applied once at the end
twomode::DickeState accumulate(const twomode::DickeState& start,
                               const std::vector<double>& segment_phases, double chi,
                               double t) {
  using namespace twomode;
  DickeState state = start;
  for (std::size_t s = 0; s < segment_phases.size(); ++s) {
    if (s > 0) state = flip_x(state);
    state = rotate_z(state, segment_phases[s]);
  }
  if (chi * t != 0.0) state = oat_evolve(state, chi, t);
  return state;
}

}  // namespace

Gradiometer::Gradiometer(SequenceConfig seq, NoiseConfig noise)
    : seq_(seq), noise_(noise), splitter_(seq.n_atoms) {
  validate(seq_);
  validate(noise_);
  angle_std_ = splitter_angle_std(noise_.sigma_bs2);
}

ShotPair Gradiometer::run_shot(std::int64_t shot_id) const {
  using namespace twomode;
  rng::Sequence rngseq(noise_.seed, rng::Stream::shots, static_cast<std::uint64_t>(shot_id));
  // fixed draw order per shot: common phases (one per echo segment), splitter
  // errors, technical phases. The common phase drifts during interrogation,
  // so every segment sees a fresh draw: a pi pulse refocuses the DC terms
  // (static mismatch, per-shot technical offsets) but not the common sweep.
  const auto weights = cpmg_weights(seq_.echo, seq_.n_echo_pulses);
  std::vector<double> common(weights.size());
  for (auto& c : common)
    c = noise_.common_phase_law.offset_rad + noise_.common_phase_law.width_rad * rngseq.uniform();
  const double eta[2] = {angle_std_ * rngseq.gaussian(), angle_std_ * rngseq.gaussian()};
  const double tech_std = noise_.sigma_tech / std::sqrt(2.0);  // differential std is sigma_tech
  const double xi[2] = {tech_std * rngseq.gaussian(), tech_std * rngseq.gaussian()};

  const double t = seq_.t_interrogation;
  ShotPair shot;
  shot.shot_id = shot_id;
  double z[2];
  std::vector<double> phases(weights.size());
  for (int ifo = 0; ifo < 2; ++ifo) {
    const double phi_static = (seq_.epsilon + (ifo == 1 ? seq_.delta : 0.0)) * t;
    for (std::size_t s = 0; s < weights.size(); ++s)
      phases[s] = (common[s] + phi_static + xi[ifo]) * weights[s];
    // first splitter on the all-left state, with angle error eta: an exact
    // coherent state, so the dense rotation is only needed at readout
    DickeState state =
        coherent_state(seq_.n_atoms, units::pi / 2.0 - eta[ifo], units::pi / 2.0);
    state = accumulate(state, phases, seq_.chi, t);
    state = rotate_z(state, units::pi / 2.0);
    state = splitter_.apply(state, -units::pi / 2.0);
    z[ifo] = ZSampler(state).draw(rngseq.uniform());
  }
  shot.z1 = z[0];
  shot.z2 = z[1];
  return shot;
}

std::vector<ShotPair> Gradiometer::run(int n_shots, ExecPolicy policy) const {
  if (n_shots < 1) throw std::invalid_argument("Gradiometer: need at least one shot");
  std::vector<ShotPair> shots(n_shots);
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n_shots; ++k) shots[k] = run_shot(k);
  } else {
    for (int k = 0; k < n_shots; ++k) shots[k] = run_shot(k);
  }
  return shots;
}

std::pair<double, double> Gradiometer::expectation() const {
  using namespace twomode;
  const double t = seq_.t_interrogation;
  double z[2];
  const auto weights = cpmg_weights(seq_.echo, seq_.n_echo_pulses);
  std::vector<double> phases(weights.size());
  for (int ifo = 0; ifo < 2; ++ifo) {
    const double phi_static = (seq_.epsilon + (ifo == 1 ? seq_.delta : 0.0)) * t;
    for (std::size_t s = 0; s < weights.size(); ++s)
      phases[s] = (noise_.common_phase_law.offset_rad + phi_static) * weights[s];
    DickeState state = coherent_state(seq_.n_atoms, units::pi / 2.0, units::pi / 2.0);
    state = accumulate(state, phases, seq_.chi, t);
    state = rotate_z(state, units::pi / 2.0);
    state = splitter_.apply(state, -units::pi / 2.0);
    z[ifo] = moments(state).jz / (0.5 * seq_.n_atoms);
  }
  return {z[0], z[1]};
}

ShotPair run_shot(const SequenceConfig& seq, const NoiseConfig& noise, std::int64_t shot_id) {
  return Gradiometer(seq, noise).run_shot(shot_id);
}

std::vector<ShotPair> run_gradiometer(const SequenceConfig& seq, const NoiseConfig& noise,
                                      int n_shots, ExecPolicy policy) {
  return Gradiometer(seq, noise).run(n_shots, policy);
}

std::pair<double, double> run_expectation(const SequenceConfig& seq) {
  return Gradiometer(seq, NoiseConfig{}).expectation();
}

std::vector<RabiPoint> rabi_scan(int n_atoms, double tunneling_hz,
                                 const std::vector<double>& times_s, int n_shots,
                                 std::uint64_t seed) {
  if (!(tunneling_hz > 0.0)) throw std::invalid_argument("rabi_scan: tunneling must be positive");
  if (n_atoms < 1) throw std::invalid_argument("rabi_scan: need at least one atom");
  if (n_shots < 1) throw std::invalid_argument("rabi_scan: need at least one shot");
  const double omega = units::two_pi * 2.0 * tunneling_hz;  // Rabi rate, rad/s
  twomode::XRotator rot(n_atoms);
  const auto left = twomode::coherent_state(n_atoms, 0.0, 0.0);
  std::vector<RabiPoint> out(times_s.size());
  for (std::size_t p = 0; p < times_s.size(); ++p) {
    out[p].t_s = times_s[p];
    const auto state = rot.apply(left, omega * times_s[p]);
    twomode::ZSampler sampler(state);
    for (int ifo = 0; ifo < 2; ++ifo) {
      rng::Sequence rngseq(seed, rng::Stream::scan, 2 * p + ifo);
      double mean = 0.0;
      for (int k = 0; k < n_shots; ++k) mean += sampler.draw(rngseq.uniform());
      (ifo == 0 ? out[p].z1 : out[p].z2) = mean / n_shots;
    }
  }
  return out;
}

void write_shots_csv(const std::string& path, const std::vector<ShotPair>& shots) {
  std::vector<std::vector<double>> rows(shots.size());
  for (std::size_t i = 0; i < shots.size(); ++i)
    rows[i] = {static_cast<double>(shots[i].shot_id), shots[i].z1, shots[i].z2};
  csv::write(path, {"shot_id", "z1", "z2"}, rows);
}

std::vector<ShotPair> read_shots_csv(const std::string& path) {
  const auto table = csv::read(path);
  const int ci = table.column("shot_id");
  const int c1 = table.column("z1");
  const int c2 = table.column("z2");
  if (ci < 0 || c1 < 0 || c2 < 0)
    throw std::invalid_argument(path + ": expected columns shot_id, z1, z2");
  std::vector<ShotPair> shots(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    shots[i].shot_id = static_cast<std::int64_t>(table.rows[i][ci]);
    shots[i].z1 = table.rows[i][c1];
    shots[i].z2 = table.rows[i][c2];
    if (std::abs(shots[i].z1) > 1.0 || std::abs(shots[i].z2) > 1.0)
      throw std::invalid_argument(path + ": imbalance out of [-1, 1] at data row " +
                                  std::to_string(i + 1));
  }
  return shots;
}

}  // namespace mzgrad::interferometer
