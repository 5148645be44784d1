#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace uwrange {

/// Deterministic seed derivation: every random stream in the toolkit is
/// keyed off a master seed, a purpose string and an index.  No global RNG
/// exists anywhere; callers construct an Rng from a derived seed.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// derived = mix(mix(master ^ hash(purpose)) ^ index).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::uint64_t index = 0) {
  std::uint64_t state = master ^ fnv1a64(purpose);
  std::uint64_t a = splitmix64_next(state);
  state = a ^ index;
  return splitmix64_next(state);
}

/// mt19937_64 wrapped with explicit bit-to-double conversions so that draws
/// do not depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  /// Circularly symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_normal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    return {s * normal(), s * normal()};
  }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace uwrange
