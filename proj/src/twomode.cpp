#include "mzgrad/twomode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mzgrad/csv.hpp"
#include "mzgrad/rng.hpp"
#include "mzgrad/units.hpp"

namespace mzgrad::twomode {

namespace {

void require_shape(const DickeState& state) {
  if (state.n_atoms < 1) throw std::invalid_argument("DickeState: need at least one atom");
  if (state.amp.size() != static_cast<std::size_t>(state.n_atoms) + 1)
    throw std::invalid_argument("DickeState: amplitude vector must have N + 1 entries");
}

// amplitudes of |theta, phi> written into out (size n + 1)
void fill_coherent(int n, double theta, double phi, std::complex<double>* out) {
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  if (s == 0.0) {  // theta = 0: all atoms in the left mode, m = +j
    std::fill(out, out + n + 1, std::complex<double>(0.0, 0.0));
    out[n] = 1.0;
    return;
  }
  if (c == 0.0) {
    std::fill(out, out + n + 1, std::complex<double>(0.0, 0.0));
    out[0] = 1.0;
    return;
  }
  const double lc = std::log(std::abs(c));
  const double ls = std::log(std::abs(s));
  const double lgn = std::lgamma(n + 1.0);
  for (int i = 0; i <= n; ++i) {
    // i = j + m atoms left, k = j - m = n - i atoms right
    const int k = n - i;
    const double logmag =
        0.5 * (lgn - std::lgamma(i + 1.0) - std::lgamma(k + 1.0)) + i * lc + k * ls;
    double sign = 1.0;
    if (c < 0.0 && (i & 1)) sign = -sign;
    if (s < 0.0 && (k & 1)) sign = -sign;
    out[i] = std::polar(sign * std::exp(logmag), k * phi);
  }
  // remove the lgamma rounding drift (a few 1e-13 at N ~ 3000)
  double norm2 = 0.0;
  for (int i = 0; i <= n; ++i) norm2 += std::norm(out[i]);
  const double inv = 1.0 / std::sqrt(norm2);
  for (int i = 0; i <= n; ++i) out[i] *= inv;
}

// J_k(x) for k = 0 .. kmax and x >= 0, by downward (Miller) recurrence
// normalized through J_0 + 2 sum_{k even} J_k = 1
std::vector<double> bessel_j_table(int kmax, double x) {
  std::vector<double> out(kmax + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  int start = kmax + 40 + static_cast<int>(15.0 * std::cbrt(kmax + x));
  if (start % 2) ++start;
  double b_hi = 0.0;          // ~ J_{k+1}
  double b = 1e-280;          // ~ J_k, arbitrary seed scale
  double sum = 2.0 * b;       // start is even
  for (int k = start; k >= 1; --k) {
    const double b_lo = (2.0 * k / x) * b - b_hi;
    b_hi = b;
    b = b_lo;
    const int idx = k - 1;
    if (idx <= kmax) out[idx] = b;
    if ((idx & 1) == 0) sum += idx == 0 ? b : 2.0 * b;
    if (std::abs(b) > 1e250) {
      b *= 1e-250;
      b_hi *= 1e-250;
      sum *= 1e-250;
      for (double& v : out) v *= 1e-250;
    }
  }
  for (double& v : out) v /= sum;
  return out;
}

// y = (Jx / r) x on the Dicke ladder with couplings t (t[i] links i, i+1)
void scaled_jx_apply(const std::vector<double>& t, double inv_r,
                     const std::vector<std::complex<double>>& x,
                     std::vector<std::complex<double>>& y) {
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    std::complex<double> acc = 0.0;
    if (i > 0) acc += t[i - 1] * x[i - 1];
    if (i + 1 < n) acc += t[i] * x[i + 1];
    y[i] = acc * inv_r;
  }
}

}  // namespace

DickeState coherent_state(int n_atoms, double theta, double phi) {
  if (n_atoms < 1) throw std::invalid_argument("coherent_state: need at least one atom");
  DickeState state;
  state.n_atoms = n_atoms;
  state.amp.resize(n_atoms + 1);
  fill_coherent(n_atoms, theta, phi, state.amp.data());
  return state;
}

double state_norm(const DickeState& state) {
  double s = 0.0;
  for (const auto& a : state.amp) s += std::norm(a);
  return std::sqrt(s);
}

void check_state(const DickeState& state) {
  require_shape(state);
  double sum = 0.0;
  for (const auto& a : state.amp) sum += std::norm(a);
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("DickeState: total probability deviates from 1 by more than 1e-12");
}

XRotator::XRotator(int n_atoms, int dense_limit) : n_atoms_(n_atoms) {
  if (n_atoms < 1) throw std::invalid_argument("XRotator: need at least one atom");
  const double j = 0.5 * n_atoms;
  coupling_.resize(n_atoms);
  for (int i = 0; i < n_atoms; ++i) {
    const double m = i - j;
    coupling_[i] = 0.5 * std::sqrt((j - m) * (j + m + 1.0));
  }
  dense_ = n_atoms <= dense_limit;
  if (dense_) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n_atoms + 1);
    Eigen::Map<const Eigen::VectorXd> sub(coupling_.data(), n_atoms);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("XRotator: tridiagonal eigensolve failed");
    evecs_ = es.eigenvectors();
    evals_ = es.eigenvalues();
  }
}

DickeState XRotator::apply(const DickeState& state, double angle) const {
  return dense_ ? apply_dense(state, angle) : apply_chebyshev(state, angle);
}

DickeState XRotator::apply_dense(const DickeState& state, double angle) const {
  require_shape(state);
  if (state.n_atoms != n_atoms_) throw std::invalid_argument("XRotator: atom-number mismatch");
  if (!dense_) throw std::logic_error("XRotator: dense path not built for this N");
  const int n = n_atoms_ + 1;
  Eigen::VectorXd re(n), im(n);
  for (int i = 0; i < n; ++i) {
    re[i] = state.amp[i].real();
    im[i] = state.amp[i].imag();
  }
  Eigen::VectorXd a = evecs_.transpose() * re;
  Eigen::VectorXd b = evecs_.transpose() * im;
  Eigen::VectorXd ar(n), br(n);
  for (int k = 0; k < n; ++k) {
    const double ph = angle * evals_[k];
    const double cp = std::cos(ph), sp = std::sin(ph);
    // (a + i b) e^{-i ph}
    ar[k] = a[k] * cp + b[k] * sp;
    br[k] = b[k] * cp - a[k] * sp;
  }
  Eigen::VectorXd re2 = evecs_ * ar;
  Eigen::VectorXd im2 = evecs_ * br;
  DickeState out;
  out.n_atoms = n_atoms_;
  out.amp.resize(n);
  for (int i = 0; i < n; ++i) out.amp[i] = {re2[i], im2[i]};
  return out;
}

DickeState XRotator::apply_chebyshev(const DickeState& state, double angle) const {
  require_shape(state);
  if (state.n_atoms != n_atoms_) throw std::invalid_argument("XRotator: atom-number mismatch");
  const int n = n_atoms_ + 1;
  const double r = 0.5 * n_atoms_;  // spectral radius of Jx
  const double x = std::abs(angle) * r;

  DickeState out;
  out.n_atoms = n_atoms_;
  out.amp.assign(n, 0.0);

  if (x < 1e-7) {
    // second-order Taylor step; truncation error below 1e-21
    std::vector<std::complex<double>> t1(n), t2(n);
    scaled_jx_apply(coupling_, 1.0, state.amp, t1);
    scaled_jx_apply(coupling_, 1.0, t1, t2);
    const std::complex<double> ia(0.0, angle);
    for (int i = 0; i < n; ++i)
      out.amp[i] = state.amp[i] - ia * t1[i] - 0.5 * angle * angle * t2[i];
    return out;
  }

  int kmax = static_cast<int>(x + 15.0 * std::cbrt(x) + 25.0);
  auto jk = bessel_j_table(kmax, x);
  while (kmax > 1 && std::abs(jk[kmax]) < 1e-18 && std::abs(jk[kmax - 1]) < 1e-18) --kmax;

  // exp(-i angle Jx) = sum_k c_k (-i sgn(angle))^k J_k(x) T_k(Jx / r)
  const std::complex<double> step(0.0, angle >= 0.0 ? -1.0 : 1.0);
  const double inv_r = 1.0 / r;
  std::vector<std::complex<double>> t_prev = state.amp, t_cur(n), t_next(n);
  scaled_jx_apply(coupling_, inv_r, t_prev, t_cur);
  std::complex<double> coef = 1.0;  // (-i sgn)^k, k = 0
  for (int i = 0; i < n; ++i) out.amp[i] = jk[0] * t_prev[i];
  coef *= step;
  for (int i = 0; i < n; ++i) out.amp[i] += 2.0 * jk[1] * coef * t_cur[i];
  for (int k = 2; k <= kmax; ++k) {
    for (int i = 0; i < n; ++i) {
      std::complex<double> acc = 0.0;
      if (i > 0) acc += coupling_[i - 1] * t_cur[i - 1];
      if (i + 1 < n) acc += coupling_[i] * t_cur[i + 1];
      t_next[i] = 2.0 * inv_r * acc - t_prev[i];
    }
    coef *= step;
    const std::complex<double> w = 2.0 * jk[k] * coef;
    for (int i = 0; i < n; ++i) out.amp[i] += w * t_next[i];
    std::swap(t_prev, t_cur);
    std::swap(t_cur, t_next);
  }
  return out;
}

DickeState rotate_x(const DickeState& state, double angle) {
  require_shape(state);
  XRotator rot(state.n_atoms);
  return rot.apply(state, angle);
}

DickeState rotate_z(const DickeState& state, double angle) {
  require_shape(state);
  DickeState out = state;
  for (std::size_t i = 0; i < out.amp.size(); ++i)
    out.amp[i] *= std::polar(1.0, -angle * state.m_at(i));
  return out;
}

DickeState flip_x(const DickeState& state) {
  require_shape(state);
  // exp(-i pi Jx): amp(m) -> (-i)^N amp(-m)
  static constexpr std::complex<double> phases[4] = {
      {1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}, {0.0, 1.0}};
  const std::complex<double> ph = phases[state.n_atoms % 4];
  DickeState out;
  out.n_atoms = state.n_atoms;
  out.amp.resize(state.amp.size());
  for (std::size_t i = 0; i < out.amp.size(); ++i)
    out.amp[i] = ph * state.amp[state.amp.size() - 1 - i];
  return out;
}

DickeState oat_evolve(const DickeState& state, double chi_rad_per_s, double t_s) {
  require_shape(state);
  DickeState out = state;
  const double a = chi_rad_per_s * t_s;
  for (std::size_t i = 0; i < out.amp.size(); ++i) {
    const double m = state.m_at(i);
    out.amp[i] *= std::polar(1.0, -a * m * m);
  }
  return out;
}

SpinMoments moments(const DickeState& state) {
  require_shape(state);
  const double j = state.j();
  std::complex<double> jplus = 0.0;
  double jz = 0.0, jz2 = 0.0;
  for (std::size_t i = 0; i < state.amp.size(); ++i) {
    const double m = state.m_at(i);
    const double p = std::norm(state.amp[i]);
    jz += m * p;
    jz2 += m * m * p;
    if (i + 1 < state.amp.size()) {
      const double c = std::sqrt((j - m) * (j + m + 1.0));
      jplus += std::conj(state.amp[i + 1]) * c * state.amp[i];
    }
  }
  SpinMoments mom;
  mom.jx = jplus.real();
  mom.jy = jplus.imag();
  mom.jz = jz;
  mom.var_jz = std::max(0.0, jz2 - jz * jz);
  mom.contrast = std::abs(jplus) / j;
  return mom;
}

ZSampler::ZSampler(const DickeState& state) : n_atoms_(state.n_atoms) {
  require_shape(state);
  cdf_.resize(state.amp.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < state.amp.size(); ++i) {
    acc += std::norm(state.amp[i]);
    cdf_[i] = acc;
  }
}

double ZSampler::draw(double u) const {
  const double target = u * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  std::size_t i = it == cdf_.end() ? cdf_.size() - 1 : static_cast<std::size_t>(it - cdf_.begin());
  return (2.0 * static_cast<double>(i) - n_atoms_) / n_atoms_;
}

std::vector<double> sample_z(const DickeState& state, int n_shots, std::uint64_t seed,
                             ExecPolicy policy) {
  if (n_shots < 1) throw std::invalid_argument("sample_z: need at least one shot");
  ZSampler sampler(state);
  std::vector<double> z(n_shots);
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n_shots; ++k) {
      rng::Sequence seq(seed, rng::Stream::shots, static_cast<std::uint64_t>(k));
      z[k] = sampler.draw(seq.uniform());
    }
  } else {
    for (int k = 0; k < n_shots; ++k) {
      rng::Sequence seq(seed, rng::Stream::shots, static_cast<std::uint64_t>(k));
      z[k] = sampler.draw(seq.uniform());
    }
  }
  return z;
}

double husimi_point(const DickeState& state, double theta, double phi) {
  require_shape(state);
  const int n = state.n_atoms;
  std::vector<std::complex<double>> css(n + 1);
  fill_coherent(n, theta, phi, css.data());
  std::complex<double> ov = 0.0;
  for (int i = 0; i <= n; ++i) ov += std::conj(css[i]) * state.amp[i];
  return (n + 1.0) / (4.0 * units::pi) * std::norm(ov);
}

HusimiGrid husimi_grid(const DickeState& state, int n_theta, int n_phi, ExecPolicy policy) {
  require_shape(state);
  if (n_theta < 1 || n_phi < 1)
    throw std::invalid_argument("husimi_grid: grid sizes must be positive");
  HusimiGrid grid;
  grid.theta.resize(n_theta);
  grid.phi.resize(n_phi);
  for (int i = 0; i < n_theta; ++i) grid.theta[i] = (i + 0.5) * units::pi / n_theta;
  for (int k = 0; k < n_phi; ++k) grid.phi[k] = (k + 0.5) * units::two_pi / n_phi;
  grid.q.resize(static_cast<std::size_t>(n_theta) * n_phi);

  const int n = state.n_atoms;
  auto row = [&](int i) {
    std::vector<std::complex<double>> css(n + 1);
    for (int k = 0; k < n_phi; ++k) {
      fill_coherent(n, grid.theta[i], grid.phi[k], css.data());
      std::complex<double> ov = 0.0;
      for (int a = 0; a <= n; ++a) ov += std::conj(css[a]) * state.amp[a];
      grid.q[static_cast<std::size_t>(i) * n_phi + k] =
          (n + 1.0) / (4.0 * units::pi) * std::norm(ov);
    }
  };
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_theta; ++i) row(i);
  } else {
    for (int i = 0; i < n_theta; ++i) row(i);
  }
  return grid;
}

void write_state_csv(const std::string& path, const DickeState& state) {
  require_shape(state);
  std::vector<std::vector<double>> rows(state.amp.size());
  for (std::size_t i = 0; i < state.amp.size(); ++i)
    rows[i] = {state.m_at(i), state.amp[i].real(), state.amp[i].imag()};
  csv::write(path, {"m", "re", "im"}, rows);
}

void write_husimi_csv(const std::string& path, const HusimiGrid& grid) {
  std::vector<std::vector<double>> rows;
  rows.reserve(grid.q.size());
  for (std::size_t i = 0; i < grid.theta.size(); ++i)
    for (std::size_t k = 0; k < grid.phi.size(); ++k)
      rows.push_back({grid.theta[i], grid.phi[k], grid.q[i * grid.phi.size() + k]});
  csv::write(path, {"theta", "phi", "q"}, rows);
}

}  // namespace mzgrad::twomode
