#pragma once

// Body + generalized Pareto hybrid: the body law below the threshold mu, a GPD
// above it, joined so that the CDF is continuous at mu. The density is left
// unconstrained at the seam.

#include <cstdint>
#include <span>
#include <vector>

#include "hpot/distmath.hpp"
#include "hpot/rng.hpp"

namespace hpot {

struct HybridParams {
  BodyParams body;
  GpdParams tail;  // tail.mu is the shared threshold
};

// Throws InputError unless sigma > 0, xi in (-1, 1), body parameters are
// valid and, for mirrored bodies, mu < 0.
void validate(const HybridParams& params);
bool is_valid(const HybridParams& params) noexcept;

double hybrid_cdf(double x, const HybridParams& params);
double hybrid_logpdf(double x, const HybridParams& params);
double hybrid_loglik(std::span<const double> data, const HybridParams& params);

// Inverse-CDF sampling, deterministic in `seed`.
std::vector<double> hybrid_sample(std::size_t n, const HybridParams& params, std::uint64_t seed);

// Solves body_cdf(x) = u for x < upper by safeguarded Newton/bisection.
// Requires 0 < u < body_cdf(upper).
double body_quantile_below(double u, const BodyParams& body, double upper);

// Precomputed evaluator for repeated density calls under fixed parameters.
// Construction does not throw; invalid parameters make every logpdf -inf.
class HybridDensity {
 public:
  explicit HybridDensity(const HybridParams& params);

  double logpdf(double x) const;
  // -inf as soon as any point is outside the support.
  double loglik(std::span<const double> data) const;

  bool valid() const { return valid_; }
  const HybridParams& params() const { return params_; }
  // F_body(mu) and 1 - F_body(mu).
  double body_mass() const { return body_mass_; }
  double tail_mass() const { return tail_mass_; }

  double draw(Rng& rng) const;

 private:
  double body_logpdf_fast(double x) const;

  HybridParams params_;
  bool valid_ = false;
  double body_mass_ = 0.0;
  double tail_mass_ = 0.0;
  double log_tail_mass_ = 0.0;
  double log_sigma_ = 0.0;
  double inv_sigma_ = 0.0;
  double tail_exponent_ = 0.0;  // -(1/xi + 1)
  bool exponential_tail_ = false;
  double body_const_ = 0.0;     // family-specific normalizer
  double inv_body_scale_ = 0.0;
};

}  // namespace hpot
