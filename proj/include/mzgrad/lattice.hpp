#pragma once

#include <string>
#include <vector>

#include "mzgrad/units.hpp"

// Optical-lattice potentials for a beat-note superlattice and a 1d
// finite-difference Schrodinger solver for the lowest trap modes.

namespace mzgrad::lattice {

struct LatticeSpec {
  double wavelength_nm = 0.0;
  double depth_nk = 0.0;
  // default: all lattices share an antinode at x = 0 (common retro-mirror)
  double phase_rad = units::pi / 2.0;
};

struct GridSpec {
  double x_min_um = 0.0;
  double x_max_um = 0.0;
  int n_points = 0;
};

struct PotentialGrid {
  std::vector<double> x_um;   // uniform, ascending
  std::vector<double> v_nk;   // potential / k_B
  double mass_kg = units::mass_k39;
};

struct DoubleWellModes {
  std::vector<double> x_um;
  std::vector<double> energies_hz;  // lowest n_states eigenvalues, E/h
  std::vector<std::vector<double>> wavefunctions;  // normalized, units um^-1/2
  // aliases of the first two solved modes and their localized combinations
  std::vector<double> psi_gs, psi_ex, psi_l, psi_r;
  double e_gs_hz = 0.0;
  double e_ex_hz = 0.0;
  double tunneling_hz = 0.0;        // (e_ex - e_gs) / 2
  double well_separation_um = 0.0;  // distance between |psi_l|, |psi_r| peaks
  double max_residual_hz = 0.0;     // worst |H psi - E psi| 2-norm
  double points_per_debroglie = 0.0;
  bool grid_warning = false;  // set when points_per_debroglie < 10
};

// Effective period of the beat between two retro-reflected lattices,
// lambda_a*lambda_b / (2 |lambda_b - lambda_a|). Throws std::domain_error on
// non-positive or equal wavelengths.
double beat_period_nm(double lambda_a_nm, double lambda_b_nm);

// V(x) = sum_i depth_i sin^2(2 pi x / lambda_i + phase_i) + 1/2 m w^2 x^2.
// Phases are reduced into [0, 2 pi). harmonic_freq_hz is w / 2 pi.
PotentialGrid build_potential(const std::vector<LatticeSpec>& lattices, const GridSpec& grid,
                              double harmonic_freq_hz = 0.0, double mass_kg = units::mass_k39);

// Lowest n_states eigenpairs of -hbar^2/2m d^2/dx^2 + V with hard walls at
// the grid ends (second-order central finite differences). psi_l/psi_r are
// (psi_gs +- psi_ex)/sqrt(2) with signs fixed so psi_l leans left of the grid
// midpoint. Throws std::runtime_error when the eigensolve fails to converge.
DoubleWellModes solve_modes(const PotentialGrid& pot, int n_states = 2);

// Contact interaction rate chi = 1.4464 (a / x0) sqrt(wy wz), with
// x0 = 1 um and the scattering length given in Bohr radii via
// a0 / x0 = 5.3e-5. Angular frequencies in rad/s, result in rad/s.
double chi_contact(double a_over_a0, double omega_y, double omega_z);

inline constexpr double a0_over_x0 = 5.3e-5;
// mean trap frequency at which chi_contact(1, w, w) equals 0.072 rad/s
inline constexpr double omega_bar_ref = 0.072 / (1.4464 * a0_over_x0);

void write_potential_csv(const std::string& path, const PotentialGrid& pot);
void write_modes_csv(const std::string& path, const DoubleWellModes& modes);

}  // namespace mzgrad::lattice
