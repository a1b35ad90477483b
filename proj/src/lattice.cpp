#include "mzgrad/lattice.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mzgrad/csv.hpp"

namespace mzgrad::lattice {

double beat_period_nm(double lambda_a_nm, double lambda_b_nm) {
  if (!(lambda_a_nm > 0.0) || !(lambda_b_nm > 0.0))
    throw std::domain_error("beat_period_nm: wavelengths must be positive");
  if (lambda_a_nm == lambda_b_nm)
    throw std::domain_error("beat_period_nm: wavelengths must differ");
  return 0.5 * lambda_a_nm * lambda_b_nm / std::abs(lambda_b_nm - lambda_a_nm);
}

PotentialGrid build_potential(const std::vector<LatticeSpec>& lattices, const GridSpec& grid,
                              double harmonic_freq_hz, double mass_kg) {
  if (grid.n_points < 2) throw std::invalid_argument("build_potential: need at least 2 grid points");
  if (!(grid.x_max_um > grid.x_min_um))
    throw std::invalid_argument("build_potential: x_max_um must exceed x_min_um");
  if (!(mass_kg > 0.0)) throw std::invalid_argument("build_potential: mass must be positive");
  if (harmonic_freq_hz < 0.0)
    throw std::invalid_argument("build_potential: harmonic frequency must be non-negative");
  for (const auto& lat : lattices) {
    if (!(lat.wavelength_nm > 0.0))
      throw std::invalid_argument("build_potential: lattice wavelength must be positive");
    if (lat.depth_nk < 0.0)
      throw std::invalid_argument("build_potential: lattice depth must be non-negative");
  }

  PotentialGrid pot;
  pot.mass_kg = mass_kg;
  pot.x_um.resize(grid.n_points);
  pot.v_nk.assign(grid.n_points, 0.0);
  const double dx = (grid.x_max_um - grid.x_min_um) / (grid.n_points - 1);
  for (int i = 0; i < grid.n_points; ++i) pot.x_um[i] = grid.x_min_um + i * dx;

  for (const auto& lat : lattices) {
    double phase = std::fmod(lat.phase_rad, units::two_pi);
    if (phase < 0.0) phase += units::two_pi;
    const double k = units::two_pi / (lat.wavelength_nm * units::nm_to_um);
    for (int i = 0; i < grid.n_points; ++i) {
      const double s = std::sin(k * pot.x_um[i] + phase);
      pot.v_nk[i] += lat.depth_nk * s * s;
    }
  }
  if (harmonic_freq_hz > 0.0) {
    const double omega = units::two_pi * harmonic_freq_hz;
    // 1/2 m w^2 x^2 in nK, with x in um
    const double coeff = 0.5 * mass_kg * omega * omega * units::um_to_m * units::um_to_m /
                         units::k_boltzmann * 1e9;
    for (int i = 0; i < grid.n_points; ++i) pot.v_nk[i] += coeff * pot.x_um[i] * pot.x_um[i];
  }
  return pot;
}

namespace {

int density_peak_index(const std::vector<double>& psi) {
  int best = 0;
  double best_val = -1.0;
  for (int i = 0; i < static_cast<int>(psi.size()); ++i) {
    const double d = psi[i] * psi[i];
    if (d > best_val) {
      best_val = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

DoubleWellModes solve_modes(const PotentialGrid& pot, int n_states) {
  const int n = static_cast<int>(pot.x_um.size());
  if (n < 16) throw std::invalid_argument("solve_modes: grid too coarse");
  if (pot.v_nk.size() != pot.x_um.size())
    throw std::invalid_argument("solve_modes: x/v size mismatch");
  const int ni = n - 2;  // interior points; psi = 0 on the walls
  if (n_states < 2 || n_states > ni)
    throw std::invalid_argument("solve_modes: n_states out of range");

  const double dx = pot.x_um[1] - pot.x_um[0];
  for (int i = 1; i < n; ++i) {
    if (std::abs(pot.x_um[i] - pot.x_um[i - 1] - dx) > 1e-9 * dx)
      throw std::invalid_argument("solve_modes: grid must be uniform");
  }
  for (double v : pot.v_nk) {
    if (!std::isfinite(v)) throw std::invalid_argument("solve_modes: potential is not finite");
  }

  // kinetic prefactor hbar^2 / (2 m h) in Hz um^2
  const double kin = units::hbar / (4.0 * units::pi * pot.mass_kg) * 1e12;
  const double t = kin / (dx * dx);
  std::vector<double> diag(ni), offd(ni > 1 ? ni - 1 : 0, -t);
  for (int i = 0; i < ni; ++i) diag[i] = 2.0 * t + pot.v_nk[i + 1] * units::nk_to_hz;
  const std::vector<double> diag_hz = diag;  // dstevr overwrites its inputs

  std::vector<double> w(ni), z(static_cast<std::size_t>(ni) * n_states);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n_states));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dstevr(
      LAPACK_COL_MAJOR, 'V', 'I', ni, diag.data(), offd.data(), 0.0, 0.0, 1, n_states, 0.0,
      &found, w.data(), z.data(), ni, isuppz.data());
  if (info != 0 || found < n_states)
    throw std::runtime_error("solve_modes: eigensolver failed (info=" + std::to_string(info) +
                             ")");

  DoubleWellModes modes;
  modes.x_um = pot.x_um;
  modes.energies_hz.assign(w.begin(), w.begin() + n_states);
  modes.wavefunctions.assign(n_states, std::vector<double>(n, 0.0));
  const double inv_sqrt_dx = 1.0 / std::sqrt(dx);
  for (int s = 0; s < n_states; ++s) {
    auto& psi = modes.wavefunctions[s];
    const double* col = z.data() + static_cast<std::size_t>(s) * ni;
    for (int i = 0; i < ni; ++i) psi[i + 1] = col[i] * inv_sqrt_dx;
    // deterministic sign: largest-magnitude component positive (leftmost wins ties)
    int imax = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(psi[i]) > std::abs(psi[imax])) imax = i;
    if (psi[imax] < 0.0)
      for (double& p : psi) p = -p;
  }

  // residual check in the interior, per state, in Hz
  double max_resid = 0.0;
  for (int s = 0; s < n_states; ++s) {
    const auto& psi = modes.wavefunctions[s];
    double acc = 0.0;
    for (int i = 1; i <= ni; ++i) {
      const double hpsi = -t * psi[i - 1] + diag_hz[i - 1] * psi[i] - t * psi[i + 1];
      const double r = hpsi - w[s] * psi[i];
      acc += r * r * dx;
    }
    max_resid = std::max(max_resid, std::sqrt(acc));
  }
  modes.max_residual_hz = max_resid;

  modes.e_gs_hz = modes.energies_hz[0];
  modes.e_ex_hz = modes.energies_hz[1];
  modes.tunneling_hz = 0.5 * (modes.e_ex_hz - modes.e_gs_hz);

  // ground state with positive mean, then pick the excited-state sign that
  // localizes (gs + ex)/sqrt(2) on the left half of the grid
  {
    auto& gs = modes.wavefunctions[0];
    double mean = 0.0;
    for (double p : gs) mean += p;
    if (mean < 0.0)
      for (double& p : gs) p = -p;
  }
  modes.psi_gs = modes.wavefunctions[0];
  modes.psi_ex = modes.wavefunctions[1];
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double x_mid = 0.5 * (pot.x_um.front() + pot.x_um.back());
  double left_mass = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pl = inv_sqrt2 * (modes.psi_gs[i] + modes.psi_ex[i]);
    if (pot.x_um[i] < x_mid) left_mass += pl * pl * dx;
  }
  if (left_mass < 0.5)
    for (double& p : modes.psi_ex) p = -p;
  modes.psi_l.resize(n);
  modes.psi_r.resize(n);
  for (int i = 0; i < n; ++i) {
    modes.psi_l[i] = inv_sqrt2 * (modes.psi_gs[i] + modes.psi_ex[i]);
    modes.psi_r[i] = inv_sqrt2 * (modes.psi_gs[i] - modes.psi_ex[i]);
  }
  modes.well_separation_um =
      std::abs(pot.x_um[density_peak_index(modes.psi_l)] - pot.x_um[density_peak_index(modes.psi_r)]);

  // grid resolution versus the de Broglie wavelength at the excited energy
  const double v_min_hz = *std::min_element(pot.v_nk.begin(), pot.v_nk.end()) * units::nk_to_hz;
  const double e_kin_hz = modes.e_ex_hz - v_min_hz;
  if (e_kin_hz > 0.0) {
    const double p_si = std::sqrt(2.0 * pot.mass_kg * units::h_planck * e_kin_hz);
    const double lambda_db_um = units::h_planck / p_si / units::um_to_m;
    modes.points_per_debroglie = lambda_db_um / dx;
  } else {
    modes.points_per_debroglie = std::numeric_limits<double>::infinity();
  }
  modes.grid_warning = modes.points_per_debroglie < 10.0;
  return modes;
}

double chi_contact(double a_over_a0, double omega_y, double omega_z) {
  if (omega_y < 0.0 || omega_z < 0.0)
    throw std::invalid_argument("chi_contact: trap frequencies must be non-negative");
  return 1.4464 * a_over_a0 * a0_over_x0 * std::sqrt(omega_y * omega_z);
}

void write_potential_csv(const std::string& path, const PotentialGrid& pot) {
  std::vector<std::vector<double>> rows(pot.x_um.size());
  for (std::size_t i = 0; i < pot.x_um.size(); ++i) rows[i] = {pot.x_um[i], pot.v_nk[i]};
  csv::write(path, {"x_um", "v_nK"}, rows);
}

void write_modes_csv(const std::string& path, const DoubleWellModes& modes) {
  std::vector<std::vector<double>> rows(modes.x_um.size());
  for (std::size_t i = 0; i < modes.x_um.size(); ++i)
    rows[i] = {modes.x_um[i], modes.psi_gs[i], modes.psi_ex[i], modes.psi_l[i], modes.psi_r[i]};
  csv::write(path, {"x_um", "psi_gs", "psi_ex", "psi_l", "psi_r"}, rows);
}

}  // namespace mzgrad::lattice
