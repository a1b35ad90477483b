#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "mzgrad/estimate.hpp"
#include "mzgrad/interferometer.hpp"
#include "mzgrad/twomode.hpp"
#include "mzgrad/units.hpp"

// Times the OpenMP kernels against their serial reference paths. Both paths
// are required to produce identical results (the tests assert it); this tool
// only reports wall clock.

namespace {

using mzgrad::ExecPolicy;

double time_ms(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const std::string& name, double serial_ms, double parallel_ms) {
  std::printf("%-34s %10.1f ms %10.1f ms %8.2fx\n", name.c_str(), serial_ms, parallel_ms,
              parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0);
}

}  // namespace

int main() {
  using namespace mzgrad;

  std::printf("%-34s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  {
    interferometer::SequenceConfig seq;
    seq.n_atoms = 300;
    seq.t_interrogation = 0.02;
    seq.delta = 233.0718;
    interferometer::NoiseConfig noise;
    noise.sigma_bs2 = 0.004;
    noise.sigma_tech = 0.15;
    noise.seed = 7;
    const int shots = 2000;
    report("gradiometer shots (N=300, 2000)",
           time_ms([&] { interferometer::run_gradiometer(seq, noise, shots, ExecPolicy::serial); }),
           time_ms([&] { interferometer::run_gradiometer(seq, noise, shots, ExecPolicy::parallel); }));
  }

  {
    const auto state = twomode::coherent_state(3000, 0.5 * units::pi, 0.5 * units::pi);
    report("sample_z (N=3000, 1e5 shots)",
           time_ms([&] { twomode::sample_z(state, 100000, 11, ExecPolicy::serial); }),
           time_ms([&] { twomode::sample_z(state, 100000, 11, ExecPolicy::parallel); }));
  }

  {
    const auto state = twomode::coherent_state(200, 0.4 * units::pi, 0.3);
    report("husimi_grid (N=200, 180x360)",
           time_ms([&] { twomode::husimi_grid(state, 180, 360, ExecPolicy::serial); }),
           time_ms([&] { twomode::husimi_grid(state, 180, 360, ExecPolicy::parallel); }));
  }

  {
    const estimate::Calibration cal;
    const auto data = estimate::sample_joint(1.0, 0.2, cal, 300, 21);
    const auto fit = estimate::mle_fit(data, cal);
    report("bootstrap (m=300, R=200)",
           time_ms([&] { estimate::bootstrap(fit, cal, 300, 200, 5, ExecPolicy::serial); }),
           time_ms([&] { estimate::bootstrap(fit, cal, 300, 200, 5, ExecPolicy::parallel); }));
  }

  return 0;
}
