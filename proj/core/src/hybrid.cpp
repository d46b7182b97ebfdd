#include "hpot/hybrid.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hpot/errors.hpp"

namespace hpot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

}  // namespace

void validate(const HybridParams& params) {
  validate(params.body);
  validate(params.tail);
  if (!(params.tail.xi > -1.0 && params.tail.xi < 1.0))
    throw InputError("hybrid: tail shape xi must lie in (-1, 1)");
  if (is_mirrored(params.body.family) && !(params.tail.mu < 0.0))
    throw InputError("hybrid: mirrored body requires a negative threshold");
}

bool is_valid(const HybridParams& params) noexcept {
  const auto& b = params.body;
  const auto& t = params.tail;
  if (!std::isfinite(b.first) || !std::isfinite(b.second)) return false;
  if (is_positive_parameter(b.family, 0) && !(b.first > 0.0)) return false;
  if (is_positive_parameter(b.family, 1) && !(b.second > 0.0)) return false;
  if (!std::isfinite(t.mu) || !(t.sigma > 0.0) || !std::isfinite(t.sigma)) return false;
  if (!(t.xi > -1.0 && t.xi < 1.0)) return false;
  if (is_mirrored(b.family) && !(t.mu < 0.0)) return false;
  return true;
}

double hybrid_cdf(double x, const HybridParams& params) {
  validate(params);
  if (std::isnan(x)) throw InputError("hybrid_cdf: x is NaN");
  const double mu = params.tail.mu;
  if (x < mu) return body_cdf(x, params.body);
  const double below = body_cdf(mu, params.body);
  return below + body_sf(mu, params.body) * gpd_cdf(x, params.tail);
}

double hybrid_logpdf(double x, const HybridParams& params) {
  validate(params);
  return HybridDensity(params).logpdf(x);
}

double hybrid_loglik(std::span<const double> data, const HybridParams& params) {
  if (data.empty()) throw InputError("hybrid_loglik: data must be non-empty");
  validate(params);
  return HybridDensity(params).loglik(data);
}

std::vector<double> hybrid_sample(std::size_t n, const HybridParams& params, std::uint64_t seed) {
  if (n == 0) throw InputError("hybrid_sample: n must be >= 1");
  validate(params);
  const HybridDensity density(params);
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = density.draw(rng);
  return out;
}

double body_quantile_below(double u, const BodyParams& body, double upper) {
  const double cap = body_cdf(upper, body);
  if (!(u > 0.0 && u < cap)) throw InputError("body_quantile_below: u outside (0, F(upper))");

  double hi = upper;
  double step = std::max(1.0, std::fabs(upper));
  double lo = upper - step;
  for (int i = 0; i < 2000 && body_cdf(lo, body) > u; ++i) {
    step *= 2.0;
    lo = upper - step;
  }

  // Newton from the upper end is usually a good start; the bracket keeps it safe.
  double x = upper - (cap - u) / std::exp(body_logpdf(upper, body));
  if (!std::isfinite(x) || !(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 300; ++iter) {
    const double f = body_cdf(x, body) - u;
    if (f == 0.0) return x;
    if (f > 0.0) hi = x; else lo = x;
    if (hi - lo <= 1e-12 * std::max(1.0, std::fabs(x))) return 0.5 * (lo + hi);
    const double dens = std::exp(body_logpdf(x, body));
    double next = x - f / dens;
    if (!std::isfinite(next) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-14 * std::max(1.0, std::fabs(x))) return next;
    x = next;
  }
  return x;
}

// ---------------------------------------------------------------------------

HybridDensity::HybridDensity(const HybridParams& params) : params_(params) {
  if (!is_valid(params)) return;
  const BodyParams& b = params.body;
  body_mass_ = body_cdf(params.tail.mu, b);
  tail_mass_ = body_sf(params.tail.mu, b);
  log_tail_mass_ = std::log(tail_mass_);
  log_sigma_ = std::log(params.tail.sigma);
  inv_sigma_ = 1.0 / params.tail.sigma;
  exponential_tail_ = std::fabs(params.tail.xi) < kXiZeroTolerance;
  tail_exponent_ = exponential_tail_ ? -1.0 : -(1.0 / params.tail.xi + 1.0);
  inv_body_scale_ = 1.0 / b.second;
  switch (b.family) {
    case BodyFamily::normal: body_const_ = -std::log(b.second) - kLogSqrt2Pi; break;
    case BodyFamily::cauchy: body_const_ = std::log(b.second) - std::log(std::numbers::pi); break;
    case BodyFamily::logistic: body_const_ = -std::log(b.second); break;
    case BodyFamily::mirrored_gamma: body_const_ = b.first * std::log(b.second) - ln_gamma(b.first); break;
    case BodyFamily::mirrored_lognormal: body_const_ = -std::log(b.second) - kLogSqrt2Pi; break;
  }
  valid_ = true;
}

double HybridDensity::body_logpdf_fast(double x) const {
  const BodyParams& b = params_.body;
  switch (b.family) {
    case BodyFamily::normal: {
      const double z = (x - b.first) * inv_body_scale_;
      return body_const_ - 0.5 * z * z;
    }
    case BodyFamily::cauchy: {
      const double d = x - b.first;
      return body_const_ - std::log(d * d + b.second * b.second);
    }
    case BodyFamily::logistic: {
      const double az = std::fabs((x - b.first) * inv_body_scale_);
      return body_const_ - az - 2.0 * std::log1p(std::exp(-az));
    }
    case BodyFamily::mirrored_gamma: {
      if (x >= 0.0) return -kInf;
      const double y = -x;
      return body_const_ + (b.first - 1.0) * std::log(y) - b.second * y;
    }
    case BodyFamily::mirrored_lognormal: {
      if (x >= 0.0) return -kInf;
      const double ly = std::log(-x);
      const double z = (ly - b.first) * inv_body_scale_;
      return body_const_ - ly - 0.5 * z * z;
    }
  }
  return -kInf;
}

double HybridDensity::logpdf(double x) const {
  if (!valid_ || !std::isfinite(x)) return -kInf;
  const double mu = params_.tail.mu;
  if (x < mu) return body_logpdf_fast(x);
  const double z = (x - mu) * inv_sigma_;
  if (exponential_tail_) return log_tail_mass_ - log_sigma_ - z;
  const double t = params_.tail.xi * z;
  if (1.0 + t <= 0.0) return -kInf;
  return log_tail_mass_ - log_sigma_ + tail_exponent_ * std::log1p(t);
}

double HybridDensity::loglik(std::span<const double> data) const {
  if (!valid_) return -kInf;
  double total = 0.0;
  for (double x : data) {
    const double lp = logpdf(x);
    if (lp == -kInf) return -kInf;
    total += lp;
  }
  return total;
}

double HybridDensity::draw(Rng& rng) const {
  if (!valid_) throw InputError("HybridDensity::draw: invalid parameters");
  const double u = rng.uniform();
  if (u < body_mass_) return body_quantile_below(u, params_.body, params_.tail.mu);
  double v = (u - body_mass_) / tail_mass_;
  if (!(v < 1.0)) v = std::nextafter(1.0, 0.0);
  if (v < 0.0) v = 0.0;
  return gpd_quantile(v, params_.tail);
}

}  // namespace hpot
