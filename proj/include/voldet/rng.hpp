#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace voldet {

// Every randomized operation in this library takes an explicit 64-bit seed
// and draws through the helpers below. std::mt19937_64 output is pinned by
// the standard and the distribution code here avoids <random> distributions,
// whose algorithms are implementation-defined, so identical seeds give
// identical results on every platform.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi). Returns lo exactly when lo == hi.
inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + uniform_unit(rng) * (hi - lo);
}

/// Unbiased uniform integer in [0, n).
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Uniform integer in [lo, hi] inclusive.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
  return lo + static_cast<std::int64_t>(
                  uniform_below(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

/// Bernoulli draw; p <= 0 never fires, p >= 1 always fires.
inline bool coin(Rng& rng, double p) { return uniform_unit(rng) < p; }

/// Fisher-Yates shuffle driven by uniform_below, so the permutation depends
/// only on the seed, not on the standard library.
template <typename T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(uniform_below(rng, static_cast<std::uint64_t>(i)));
    std::swap(v[i - 1], v[j]);
  }
}

/// Standard normal variates via Box-Muller, one cached spare per pair.
class NormalSampler {
 public:
  explicit NormalSampler(Rng& rng) : rng_(rng) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_unit(rng_);
    while (u1 <= 0.0) u1 = uniform_unit(rng_);
    const double u2 = uniform_unit(rng_);
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * 3.14159265358979323846 * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

 private:
  Rng& rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace voldet
