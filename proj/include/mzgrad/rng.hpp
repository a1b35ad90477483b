#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random streams. Every consumer derives an independent stream
// from (seed, stream tag, index), so work items (shots, bootstrap resamples)
// can be evaluated in any order or in parallel and still draw identical
// numbers. The generator is splitmix64; statistical quality is adequate for
// Monte Carlo use and the state is a single 64-bit word.

namespace mzgrad::rng {

enum class Stream : std::uint64_t {
  shots = 0x53484f54u,
  bootstrap = 0x424f4f54u,
  noise = 0x4e4f4953u,
  scan = 0x5343414eu,
};

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Sequence {
 public:
  Sequence(std::uint64_t seed, Stream stream, std::uint64_t index) {
    // absorb the three key words through the output function so that
    // neighbouring (seed, index) pairs land in decorrelated states
    std::uint64_t s = seed;
    state_ = splitmix64_next(s);
    s ^= static_cast<std::uint64_t>(stream) * 0xbf58476d1ce4e5b9ull;
    state_ ^= splitmix64_next(s);
    s ^= index * 0x94d049bb133111ebull;
    state_ ^= splitmix64_next(s);
  }

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // uniform on [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; the second value of each pair is cached
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mzgrad::rng
