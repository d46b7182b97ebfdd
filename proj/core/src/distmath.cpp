#include "hpot/distmath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "hpot/errors.hpp"

namespace hpot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw InputError(std::string(what) + ": argument must be finite");
}

// exp(-x + a log x - lnGamma(a)), the common prefactor of P and Q.
double gamma_prefactor(double a, double x) { return std::exp(-x + a * std::log(x) - ln_gamma(a)); }

double gamma_series(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) return sum * gamma_prefactor(a, x);
  }
  throw NumericalError("gamma_p: series failed to converge");
}

double gamma_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return gamma_prefactor(a, x) * h;
  }
  throw NumericalError("gamma_q: continued fraction failed to converge");
}

void check_incomplete_gamma_args(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) throw InputError("incomplete gamma: shape must be positive");
  if (!(x >= 0.0) || std::isnan(x)) throw InputError("incomplete gamma: x must be non-negative");
}

double chi2_logpdf(double x, int df) {
  const double k = 0.5 * df;
  return (k - 1.0) * std::log(x) - 0.5 * x - k * std::numbers::ln2 - ln_gamma(k);
}

}  // namespace

// ---------------------------------------------------------------------------

double std_normal_cdf(double x) {
  require_finite(x, "std_normal_cdf");
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

double ln_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InputError("ln_gamma: argument must be positive and finite");
  static constexpr std::array<double, 9> c{0.99999999999980993,  676.5203681218851,
                                           -1259.1392167224028,  771.32342877765313,
                                           -176.61502916214059,  12.507343278686905,
                                           -0.13857109526572012, 9.9843695780195716e-6,
                                           1.5056327351493116e-7};
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - ln_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double a = c[0];
  for (int i = 1; i < 9; ++i) a += c[i] / (z + i);
  const double t = z + 7.5;
  return kLogSqrt2Pi + (z + 0.5) * std::log(t) - t + std::log(a);
}

double gamma_p(double a, double x) {
  check_incomplete_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_continued_fraction(a, x);
}

double gamma_q(double a, double x) {
  check_incomplete_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_series(a, x);
  return gamma_continued_fraction(a, x);
}

double chi2_cdf(double x, int df) {
  if (df < 1) throw InputError("chi2_cdf: df must be >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * df, 0.5 * x);
}

double chi2_quantile(double p, int df) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("chi2_quantile: p must lie in (0, 1)");
  if (df < 1) throw InputError("chi2_quantile: df must be >= 1");

  double lo = 0.0;
  double hi = df + 10.0 * std::sqrt(2.0 * df) + 10.0;
  while (chi2_cdf(hi, df) < p) {
    lo = hi;
    hi *= 2.0;
  }

  const double k = df;
  // Wilson-Hilferty starting point from a rational normal-quantile guess.
  const double z = std::sqrt(2.0) * [&] {
    const double t = std::sqrt(-2.0 * std::log(std::min(p, 1.0 - p)));
    const double g = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                             (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    return (p < 0.5 ? -g : g) / std::sqrt(2.0);
  }();
  double x = k * std::pow(1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k)), 3);
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

  for (int iter = 0; iter < 500; ++iter) {
    const double f = chi2_cdf(x, df) - p;
    if (f == 0.0) return x;
    if (f < 0.0) lo = x; else hi = x;
    if (hi - lo <= 4.0 * kEps * hi) return x;
    const double dens = std::exp(chi2_logpdf(x, df));
    double next = x - f / dens;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 4.0 * kEps * x) return next;
    x = next;
  }
  return x;
}

// ---------------------------------------------------------------------------

void validate(const GpdParams& params) {
  if (!std::isfinite(params.mu) || !std::isfinite(params.xi))
    throw InputError("GPD: mu and xi must be finite");
  if (!(params.sigma > 0.0) || !std::isfinite(params.sigma))
    throw InputError("GPD: sigma must be positive and finite");
}

std::optional<double> gpd_upper_endpoint(const GpdParams& params) {
  if (params.xi >= 0.0 || std::fabs(params.xi) < kXiZeroTolerance) return std::nullopt;
  return params.mu - params.sigma / params.xi;
}

double gpd_sf(double x, const GpdParams& params) {
  validate(params);
  if (std::isnan(x)) throw InputError("gpd_sf: x is NaN");
  if (x < params.mu) throw InputError("gpd_sf: x below the threshold");
  const double z = (x - params.mu) / params.sigma;
  if (std::fabs(params.xi) < kXiZeroTolerance) return std::exp(-z);
  const double t = params.xi * z;
  if (1.0 + t <= 0.0) return 0.0;
  return std::exp(-std::log1p(t) / params.xi);
}

double gpd_cdf(double x, const GpdParams& params) {
  validate(params);
  if (std::isnan(x)) throw InputError("gpd_cdf: x is NaN");
  if (x < params.mu) throw InputError("gpd_cdf: x below the threshold");
  const double z = (x - params.mu) / params.sigma;
  if (std::fabs(params.xi) < kXiZeroTolerance) return -std::expm1(-z);
  const double t = params.xi * z;
  if (1.0 + t <= 0.0) return 1.0;
  return -std::expm1(-std::log1p(t) / params.xi);
}

double gpd_logpdf(double x, const GpdParams& params) {
  if (!(params.sigma > 0.0) || std::isnan(x) || x < params.mu) return -kInf;
  const double z = (x - params.mu) / params.sigma;
  const double log_sigma = std::log(params.sigma);
  if (std::fabs(params.xi) < kXiZeroTolerance) return -log_sigma - z;
  const double t = params.xi * z;
  if (1.0 + t <= 0.0) return -kInf;
  return -log_sigma - (1.0 / params.xi + 1.0) * std::log1p(t);
}

double gpd_quantile(double u, const GpdParams& params) {
  validate(params);
  if (!(u >= 0.0 && u < 1.0)) throw InputError("gpd_quantile: u must lie in [0, 1)");
  const double log_sf = std::log1p(-u);
  if (std::fabs(params.xi) < kXiZeroTolerance) return params.mu - params.sigma * log_sf;
  return params.mu + params.sigma / params.xi * std::expm1(-params.xi * log_sf);
}

double gpd_loglik(std::span<const double> exceedances, double threshold, double sigma, double xi) {
  if (!(sigma > 0.0)) return -kInf;
  const GpdParams params{threshold, sigma, xi};
  double total = 0.0;
  for (double x : exceedances) {
    const double lp = gpd_logpdf(x, params);
    if (lp == -kInf) return -kInf;
    total += lp;
  }
  return total;
}

namespace {

constexpr double kXiBound = 0.999;

// Negated log-likelihood and gradient in (s = log sigma, xi) for excesses y.
struct GpdObjective {
  std::span<const double> y;

  // Returns +inf outside the support.
  double value(double s, double xi) const {
    const double inv_sigma = std::exp(-s);
    double sum_log = 0.0;
    const double n = static_cast<double>(y.size());
    if (std::fabs(xi) < kXiZeroTolerance) {
      for (double v : y) sum_log += v * inv_sigma;
      return n * s + sum_log;
    }
    for (double v : y) {
      const double w = xi * v * inv_sigma;
      if (1.0 + w <= 0.0) return kInf;
      sum_log += std::log1p(w);
    }
    return n * s + (1.0 / xi + 1.0) * sum_log;
  }

  std::array<double, 2> gradient(double s, double xi) const {
    const double inv_sigma = std::exp(-s);
    const double n = static_cast<double>(y.size());
    double sum_z_over_t = 0.0;
    double sum_xi_term = 0.0;
    for (double v : y) {
      const double z = v * inv_sigma;
      const double t = 1.0 + xi * z;
      sum_z_over_t += z / t;
      if (std::fabs(xi) < 1e-4) {
        sum_xi_term += z * z / 2.0 - 2.0 * xi * z * z * z / 3.0 + 0.75 * xi * xi * z * z * z * z;
      } else {
        sum_xi_term += std::log1p(xi * z) / (xi * xi) - z / (xi * t);
      }
    }
    const double dl_ds = -n + (1.0 + xi) * sum_z_over_t;
    const double dl_dxi = sum_xi_term - sum_z_over_t;
    return {-dl_ds, -dl_dxi};
  }
};

struct OptimResult {
  double s = 0.0;
  double xi = 0.0;
  double f = kInf;
  int iterations = 0;
  bool converged = false;
};

// BFGS in two dimensions with a box on xi and a backtracking line search
// that treats leaving the support as an infinite objective.
OptimResult minimize_gpd(const GpdObjective& obj, double s0, double xi0) {
  OptimResult r;
  double x[2] = {s0, std::clamp(xi0, -kXiBound, kXiBound)};
  double f = obj.value(x[0], x[1]);
  if (!std::isfinite(f)) return r;
  auto g = obj.gradient(x[0], x[1]);
  double H[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
  const double n = static_cast<double>(obj.y.size());

  for (int it = 0; it < 500; ++it) {
    r.iterations = it + 1;
    // Projected gradient test at the xi bounds.
    double gp1 = g[1];
    if ((x[1] <= -kXiBound && gp1 > 0.0) || (x[1] >= kXiBound && gp1 < 0.0)) gp1 = 0.0;
    if (std::hypot(g[0], gp1) < 1e-9 * std::max(1.0, n)) {
      r.converged = true;
      break;
    }
    double d[2] = {-(H[0][0] * g[0] + H[0][1] * g[1]), -(H[1][0] * g[0] + H[1][1] * g[1])};
    if (d[0] * g[0] + d[1] * g[1] >= 0.0) {
      H[0][0] = H[1][1] = 1.0;
      H[0][1] = H[1][0] = 0.0;
      d[0] = -g[0];
      d[1] = -g[1];
    }
    // At an active bound, drop the component pushing outward.
    if ((x[1] <= -kXiBound && d[1] < 0.0) || (x[1] >= kXiBound && d[1] > 0.0)) d[1] = 0.0;

    double step = 1.0;
    double xn[2];
    double fn = kInf;
    const double slope = d[0] * g[0] + d[1] * g[1];
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn[0] = x[0] + step * d[0];
      xn[1] = std::clamp(x[1] + step * d[1], -kXiBound, kXiBound);
      fn = obj.value(xn[0], xn[1]);
      if (std::isfinite(fn) && fn <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent possible along d; treat as converged if the gradient is small
      // relative to the objective scale.
      r.converged = std::hypot(g[0], gp1) < 1e-5 * std::max(1.0, n);
      break;
    }
    const auto gn = obj.gradient(xn[0], xn[1]);
    const double sx[2] = {xn[0] - x[0], xn[1] - x[1]};
    const double yx[2] = {gn[0] - g[0], gn[1] - g[1]};
    const double sy = sx[0] * yx[0] + sx[1] * yx[1];
    const double df = f - fn;
    x[0] = xn[0];
    x[1] = xn[1];
    f = fn;
    g = gn;
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const double Hy[2] = {H[0][0] * yx[0] + H[0][1] * yx[1], H[1][0] * yx[0] + H[1][1] * yx[1]};
      const double yHy = yx[0] * Hy[0] + yx[1] * Hy[1];
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          H[i][j] += (1.0 + rho * yHy) * rho * sx[i] * sx[j] - rho * (Hy[i] * sx[j] + sx[i] * Hy[j]);
    }
    if (df >= 0.0 && df < 1e-15 * std::max(1.0, std::fabs(f)) &&
        std::hypot(sx[0], sx[1]) < 1e-12) {
      r.converged = std::hypot(g[0], gp1) < 1e-5 * std::max(1.0, n);
      break;
    }
  }
  r.s = x[0];
  r.xi = x[1];
  r.f = f;
  return r;
}

}  // namespace

GpdFit gpd_mle(std::span<const double> exceedances, double threshold) {
  std::vector<double> y;
  y.reserve(exceedances.size());
  for (double x : exceedances) {
    if (!std::isfinite(x)) throw InputError("gpd_mle: non-finite exceedance");
    if (x > threshold) y.push_back(x - threshold);
  }
  if (y.size() < 10) {
    std::ostringstream os;
    os << "gpd_mle: need at least 10 exceedances strictly above the threshold, got " << y.size();
    throw InputError(os.str());
  }
  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  if (*ymin_it == *ymax_it) throw InputError("gpd_mle: all exceedances are identical");
  const double ymax = *ymax_it;

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size() - 1);

  const GpdObjective obj{y};
  auto feasible_sigma = [&](double sigma, double xi) {
    return xi < 0.0 ? std::max(sigma, -xi * ymax * 1.05) : sigma;
  };

  std::vector<std::pair<double, double>> starts;
  {
    const double ratio = mean * mean / var;
    const double xi_m = std::clamp(0.5 * (1.0 - ratio), -0.9, 0.9);
    const double sigma_m = 0.5 * mean * (ratio + 1.0);
    starts.emplace_back(feasible_sigma(sigma_m, xi_m), xi_m);
  }
  starts.emplace_back(mean, 0.0);
  starts.emplace_back(feasible_sigma(mean * 1.3, -0.3), -0.3);
  starts.emplace_back(mean * 0.7, 0.3);

  OptimResult best;
  int total_iterations = 0;
  for (const auto& [sigma0, xi0] : starts) {
    const OptimResult r = minimize_gpd(obj, std::log(sigma0), xi0);
    total_iterations += r.iterations;
    if (r.converged && r.f < best.f) best = r;
  }
  if (!best.converged) {
    std::ostringstream os;
    os << "gpd_mle: optimizer did not converge from any start (n=" << y.size() << ", mean excess="
       << mean << ", max excess=" << ymax << ")";
    throw NumericalError(os.str());
  }

  GpdFit fit;
  fit.sigma = std::exp(best.s);
  fit.xi = best.xi;
  fit.loglik = -best.f;
  fit.iterations = total_iterations;
  fit.n = y.size();

  // Observed information by central differences of the analytic gradient,
  // converted from (log sigma, xi) to (sigma, xi).
  auto grad_natural = [&](double sigma, double xi) {
    const auto gs = obj.gradient(std::log(sigma), xi);
    return std::array<double, 2>{gs[0] / sigma, gs[1]};
  };
  const double hs = 1e-5 * fit.sigma;
  const double hx = 1e-5;
  const auto gsp = grad_natural(fit.sigma + hs, fit.xi);
  const auto gsm = grad_natural(fit.sigma - hs, fit.xi);
  const auto gxp = grad_natural(fit.sigma, fit.xi + hx);
  const auto gxm = grad_natural(fit.sigma, fit.xi - hx);
  const double i00 = (gsp[0] - gsm[0]) / (2.0 * hs);
  const double i11 = (gxp[1] - gxm[1]) / (2.0 * hx);
  const double i01 = 0.5 * ((gsp[1] - gsm[1]) / (2.0 * hs) + (gxp[0] - gxm[0]) / (2.0 * hx));
  const double det = i00 * i11 - i01 * i01;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (det > 0.0 && i00 > 0.0 && std::isfinite(det)) {
    fit.covariance = {{{i11 / det, -i01 / det}, {-i01 / det, i00 / det}}};
  } else {
    fit.covariance = {{{nan, nan}, {nan, nan}}};
  }
  return fit;
}

// ---------------------------------------------------------------------------

std::string_view to_string(BodyFamily family) {
  switch (family) {
    case BodyFamily::normal: return "normal";
    case BodyFamily::cauchy: return "cauchy";
    case BodyFamily::logistic: return "logistic";
    case BodyFamily::mirrored_gamma: return "gamma";
    case BodyFamily::mirrored_lognormal: return "lognormal";
  }
  return "unknown";
}

bool is_mirrored(BodyFamily family) {
  return family == BodyFamily::mirrored_gamma || family == BodyFamily::mirrored_lognormal;
}

bool is_positive_parameter(BodyFamily family, int slot) {
  if (family == BodyFamily::mirrored_gamma) return true;
  return slot == 1;
}

void validate(const BodyParams& params) {
  if (!std::isfinite(params.first) || !std::isfinite(params.second))
    throw InputError("body parameters must be finite");
  for (int slot = 0; slot < 2; ++slot) {
    const double v = slot == 0 ? params.first : params.second;
    if (is_positive_parameter(params.family, slot) && !(v > 0.0)) {
      std::ostringstream os;
      os << to_string(params.family) << " body: parameter " << slot + 1 << " must be positive";
      throw InputError(os.str());
    }
  }
}

double body_cdf(double x, const BodyParams& bp) {
  validate(bp);
  if (std::isnan(x)) throw InputError("body_cdf: x is NaN");
  switch (bp.family) {
    case BodyFamily::normal:
      if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
      return std_normal_cdf((x - bp.first) / bp.second);
    case BodyFamily::cauchy: {
      const double z = (x - bp.first) / bp.second;
      if (z < 0.0) return std::atan(-1.0 / z) / std::numbers::pi;
      return 0.5 + std::atan(z) / std::numbers::pi;
    }
    case BodyFamily::logistic: return 1.0 / (1.0 + std::exp(-(x - bp.first) / bp.second));
    case BodyFamily::mirrored_gamma:
      if (x >= 0.0) return 1.0;
      return gamma_q(bp.first, -bp.second * x);
    case BodyFamily::mirrored_lognormal:
      if (x >= 0.0) return 1.0;
      if (std::isinf(x)) return 0.0;
      return std_normal_cdf(-(std::log(-x) - bp.first) / bp.second);
  }
  return 0.0;
}

double body_sf(double x, const BodyParams& bp) {
  validate(bp);
  if (std::isnan(x)) throw InputError("body_sf: x is NaN");
  switch (bp.family) {
    case BodyFamily::normal:
      if (std::isinf(x)) return x > 0 ? 0.0 : 1.0;
      return std_normal_cdf(-(x - bp.first) / bp.second);
    case BodyFamily::cauchy: {
      const double z = (x - bp.first) / bp.second;
      if (z > 0.0) return std::atan(1.0 / z) / std::numbers::pi;
      return 0.5 - std::atan(z) / std::numbers::pi;
    }
    case BodyFamily::logistic: return 1.0 / (1.0 + std::exp((x - bp.first) / bp.second));
    case BodyFamily::mirrored_gamma:
      if (x >= 0.0) return 0.0;
      return gamma_p(bp.first, -bp.second * x);
    case BodyFamily::mirrored_lognormal:
      if (x >= 0.0) return 0.0;
      if (std::isinf(x)) return 1.0;
      return std_normal_cdf((std::log(-x) - bp.first) / bp.second);
  }
  return 0.0;
}

double body_logpdf(double x, const BodyParams& bp) {
  validate(bp);
  if (!std::isfinite(x)) return -kInf;
  switch (bp.family) {
    case BodyFamily::normal: {
      const double z = (x - bp.first) / bp.second;
      return -0.5 * z * z - std::log(bp.second) - kLogSqrt2Pi;
    }
    case BodyFamily::cauchy: {
      const double d = x - bp.first;
      return std::log(bp.second) - std::log(std::numbers::pi) - std::log(d * d + bp.second * bp.second);
    }
    case BodyFamily::logistic: {
      const double az = std::fabs((x - bp.first) / bp.second);
      return -az - std::log(bp.second) - 2.0 * std::log1p(std::exp(-az));
    }
    case BodyFamily::mirrored_gamma: {
      if (x >= 0.0) return -kInf;
      const double y = -x;
      return (bp.first - 1.0) * std::log(y) + bp.first * std::log(bp.second) - bp.second * y -
             ln_gamma(bp.first);
    }
    case BodyFamily::mirrored_lognormal: {
      if (x >= 0.0) return -kInf;
      const double ly = std::log(-x);
      const double z = (ly - bp.first) / bp.second;
      return -ly - std::log(bp.second) - kLogSqrt2Pi - 0.5 * z * z;
    }
  }
  return -kInf;
}

}  // namespace hpot
