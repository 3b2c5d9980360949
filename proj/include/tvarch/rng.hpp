/**
 * @file rng.hpp
 * @brief Reproducible random streams.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard for a given 64-bit seed. The library distributions of <random>
 * are implementation-defined, so the variate transforms live here:
 * uniforms take the top 53 bits, Gaussians use the Marsaglia polar method
 * and Student t(nu) is Z / sqrt(chi2_nu / nu) with chi2_nu a sum of nu
 * squared Gaussians. Replication r of a run seeded with s uses the stream
 * seeded with s XOR splitmix64(r).
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tvarch {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return seed ^ splitmix64(stream);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Student t with integer degrees of freedom, not standardized.
  double student(int nu) {
    const double z = gaussian();
    double chi2 = 0.0;
    for (int k = 0; k < nu; ++k) {
      const double g = gaussian();
      chi2 += g * g;
    }
    return z / std::sqrt(chi2 / nu);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tvarch
