#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace fastdips {

// Counter-based generator: the state is a plain counter advanced by a fixed
// odd increment and pushed through the SplitMix64 finalizer, so equal seeds
// give equal streams on every platform and substreams can be forked cheaply.
// Constants are the canonical SplitMix64 ones (Steele/Lea/Flood).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : counter_(seed) {}

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = counter_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // One Box-Muller pair per call; the cosine leg is returned, the sine leg
  // discarded. Keeps the draw count a pure function of call sequence.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 in [0,1) => 1-u1 in (0,1]
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i + 1 < n; i += 2) {
      const double u1 = uniform();
      const double u2 = uniform();
      const double r = std::sqrt(-2.0 * std::log1p(-u1));
      const double a = 6.283185307179586476925286766559 * u2;
      v[i] = r * std::cos(a);
      v[i + 1] = r * std::sin(a);
    }
    if (n % 2 != 0) v[n - 1] = normal();
    return v;
  }

  // Independent substream; tag picks the lane. Mixes the *current* counter so
  // forks taken at different points of the parent stream differ.
  Rng fork(std::uint64_t tag) const {
    std::uint64_t z = counter_ ^ (0xBF58476D1CE4E5B9ull * (tag + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::uint64_t counter_;
};

}  // namespace fastdips
