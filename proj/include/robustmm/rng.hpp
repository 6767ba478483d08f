#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace robustmm {

// Mixes (seed, stream) into an independent engine seed. Used to give every
// candidate / replication / sweep cell its own reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 core with hand-rolled distributions so that sequences are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller; u1 nudged away from 0 so log() is finite.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Marsaglia-Tsang; shape > 0, unit scale.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      double u = uniform();
      if (u <= 0.0) u = 0x1.0p-53;
      return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chisq(double df) { return 2.0 * gamma(0.5 * df); }

  // uniform integer in [0, n)
  int below(int n) {
    return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
  }

  // m distinct indices from [0, n), order randomized
  std::vector<int> sample_without_replacement(int n, int m) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out(m);
    for (int j = 0; j < m; ++j) {
      const int pick = j + below(n - j);
      std::swap(pool[j], pool[pick]);
      out[j] = pool[j];
    }
    return out;
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace robustmm
