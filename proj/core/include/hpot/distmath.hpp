#pragma once

// Special functions and the distribution primitives used by the hybrid
// models: the generalized Pareto tail and the five body families.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace hpot {

// ---------------------------------------------------------------------------
// Special functions

double std_normal_cdf(double x);

// Lanczos approximation (g = 7, 9 terms) with reflection below 0.5.
double ln_gamma(double x);

// Regularized lower / upper incomplete gamma, P(a, x) and Q(a, x) = 1 - P.
// Series for x < a + 1, Lentz continued fraction otherwise.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chi2_cdf(double x, int df);
double chi2_quantile(double p, int df);

// ---------------------------------------------------------------------------
// Generalized Pareto distribution

// Below this |xi| the exponential limit of the GPD is used.
inline constexpr double kXiZeroTolerance = 1e-9;

struct GpdParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

void validate(const GpdParams& params);

// Upper end of the support; empty when unbounded (xi >= 0).
std::optional<double> gpd_upper_endpoint(const GpdParams& params);

double gpd_cdf(double x, const GpdParams& params);
// 1 - gpd_cdf, computed without cancellation.
double gpd_sf(double x, const GpdParams& params);
// -inf outside the support.
double gpd_logpdf(double x, const GpdParams& params);
double gpd_quantile(double u, const GpdParams& params);

// Log-likelihood of exceedances over `threshold`; -inf when any point is
// outside the support.
double gpd_loglik(std::span<const double> exceedances, double threshold, double sigma, double xi);

struct GpdFit {
  double sigma = 0.0;
  double xi = 0.0;
  // Inverse observed information in (sigma, xi) coordinates.
  std::array<std::array<double, 2>, 2> covariance{};
  double loglik = 0.0;
  int iterations = 0;
  std::size_t n = 0;
};

// Maximum likelihood over sigma > 0, xi in (-0.999, 0.999). Values must be
// strictly above the threshold; at least 10 are required.
GpdFit gpd_mle(std::span<const double> exceedances, double threshold);

// ---------------------------------------------------------------------------
// Body families

enum class BodyFamily { normal, cauchy, logistic, mirrored_gamma, mirrored_lognormal };

inline constexpr std::array<BodyFamily, 5> kAllBodyFamilies{
    BodyFamily::normal, BodyFamily::cauchy, BodyFamily::logistic, BodyFamily::mirrored_gamma,
    BodyFamily::mirrored_lognormal};

// Natural-scale parameters. `first`/`second` are, per family:
//   normal             (location kappa, scale lambda)
//   cauchy             (location x0,    scale gamma)
//   logistic           (location theta, scale g)
//   mirrored_gamma     (shape p,        rate q)
//   mirrored_lognormal (log-location nu, log-scale w)
struct BodyParams {
  BodyFamily family = BodyFamily::normal;
  double first = 0.0;
  double second = 1.0;

  static BodyParams normal(double kappa, double lambda) { return {BodyFamily::normal, kappa, lambda}; }
  static BodyParams cauchy(double x0, double gamma) { return {BodyFamily::cauchy, x0, gamma}; }
  static BodyParams logistic(double theta, double g) { return {BodyFamily::logistic, theta, g}; }
  static BodyParams mirrored_gamma(double p, double q) { return {BodyFamily::mirrored_gamma, p, q}; }
  static BodyParams mirrored_lognormal(double nu, double w) {
    return {BodyFamily::mirrored_lognormal, nu, w};
  }
};

std::string_view to_string(BodyFamily family);
bool is_mirrored(BodyFamily family);
// Whether the body parameter in slot 0 / 1 must be positive.
bool is_positive_parameter(BodyFamily family, int slot);

void validate(const BodyParams& params);

// Mirrored families: cdf is exactly 1 (sf 0, logpdf -inf) for x >= 0.
double body_cdf(double x, const BodyParams& params);
double body_sf(double x, const BodyParams& params);
double body_logpdf(double x, const BodyParams& params);

}  // namespace hpot
