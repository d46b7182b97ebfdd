#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hpot {

// Seeded generator whose variates are identical on every platform.
// std::mt19937_64 and std::seed_seq are fully specified by the standard; the
// distribution objects are not, so uniform/normal/poisson are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method.
  double normal() {
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

  // Inversion by sequential search. Large means are split into pieces so
  // exp(-mean) stays representable.
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 200.0) {
      const double pieces = std::ceil(mean / 200.0);
      std::uint64_t total = 0;
      for (double i = 0; i < pieces; ++i) total += poisson(mean / pieces);
      return total;
    }
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 100000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0 && cdf < u) break;
    }
    return k;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hpot
