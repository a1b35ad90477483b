#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "mzgrad/exec.hpp"

// Exact dynamics of N bosons in two modes, written in the Dicke basis
// |j, m> with j = N/2 and m = -j .. j (amp[i] holds m = i - j). States are
// immutable values; operations return new states.

namespace mzgrad::twomode {

struct DickeState {
  int n_atoms = 0;
  std::vector<std::complex<double>> amp;
  double j() const { return 0.5 * n_atoms; }
  double m_at(std::size_t i) const { return static_cast<double>(i) - 0.5 * n_atoms; }
};

struct SpinMoments {
  double jx = 0.0, jy = 0.0, jz = 0.0;
  double var_jz = 0.0;
  double contrast = 0.0;  // |<J+>| / (N/2)
};

// Spin coherent state |theta, phi>; theta = 0 is all atoms left (m = +N/2).
DickeState coherent_state(int n_atoms, double theta, double phi);

double state_norm(const DickeState& state);
// Throws std::invalid_argument unless N >= 1, amp.size() == N + 1 and the
// norm is 1 within 1e-12.
void check_state(const DickeState& state);

// exp(-i angle Jx). Jx is tridiagonal in the Dicke basis; small N uses a
// cached dense eigendecomposition, large N a Chebyshev expansion of the
// propagator. Both paths are exposed so they can be cross-checked.
class XRotator {
 public:
  explicit XRotator(int n_atoms, int dense_limit = 600);
  DickeState apply(const DickeState& state, double angle) const;
  DickeState apply_dense(const DickeState& state, double angle) const;
  DickeState apply_chebyshev(const DickeState& state, double angle) const;
  bool uses_dense() const { return dense_; }

 private:
  int n_atoms_;
  bool dense_;
  std::vector<double> coupling_;  // J+ matrix elements between m and m+1
  Eigen::MatrixXd evecs_;
  Eigen::VectorXd evals_;
};

DickeState rotate_x(const DickeState& state, double angle);
DickeState rotate_z(const DickeState& state, double angle);
// exact pi pulse about x: amp(m) -> (-i)^N amp(-m)
DickeState flip_x(const DickeState& state);
// exp(-i chi t Jz^2)
DickeState oat_evolve(const DickeState& state, double chi_rad_per_s, double t_s);

SpinMoments moments(const DickeState& state);

// Inverse-CDF sampler over |amp(m)|^2; draw maps a uniform u in [0,1) to
// z = 2m/N. Shared by sample_z and the interferometer shot loop.
class ZSampler {
 public:
  explicit ZSampler(const DickeState& state);
  double draw(double u) const;

 private:
  int n_atoms_;
  std::vector<double> cdf_;
};

// n_shots i.i.d. projective measurements of z. Counter-based per-shot RNG
// streams make the parallel policy byte-identical to the serial one.
std::vector<double> sample_z(const DickeState& state, int n_shots, std::uint64_t seed,
                             ExecPolicy policy = ExecPolicy::serial);

struct HusimiGrid {
  std::vector<double> theta;  // midpoints in (0, pi)
  std::vector<double> phi;    // midpoints in (0, 2 pi)
  std::vector<double> q;      // row-major, q[i_theta * n_phi + i_phi]
};

// Q(theta, phi) = (N+1)/(4 pi) |<theta, phi|psi>|^2
double husimi_point(const DickeState& state, double theta, double phi);
HusimiGrid husimi_grid(const DickeState& state, int n_theta, int n_phi,
                       ExecPolicy policy = ExecPolicy::serial);

void write_state_csv(const std::string& path, const DickeState& state);
void write_husimi_csv(const std::string& path, const HusimiGrid& grid);

}  // namespace mzgrad::twomode
