#pragma once

#include <cstddef>
#include <cstdint>

namespace tireid {

// Deterministic splitmix64 generator with explicit bit-level float conversion
// and a Box-Muller Gaussian. Streams are reproducible across standard-library
// implementations, which std::*_distribution does not guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n); n > 0
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  // standard Gaussian via Box-Muller
  double normal();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tireid
