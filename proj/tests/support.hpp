#pragma once

// Shared helpers for the test binaries: random valid hybrid parameters,
// quadrature of a hybrid density and the KS distance to its CDF.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hpot/hybrid.hpp"
#include "hpot/rng.hpp"

namespace hpot::testing {

// Body parameters in a moderate range, threshold at a body quantile in
// [0.5, 0.95], tail scale tied to the body scale, xi in (-0.45, 0.45).
inline HybridParams random_hybrid(BodyFamily family, Rng& rng) {
  HybridParams p;
  double scale = 1.0;
  switch (family) {
    case BodyFamily::normal:
      scale = rng.uniform(0.2, 2.0);
      p.body = BodyParams::normal(rng.uniform(-3.0, 1.0), scale);
      break;
    case BodyFamily::cauchy:
      scale = rng.uniform(0.2, 2.0);
      p.body = BodyParams::cauchy(rng.uniform(-3.0, 1.0), scale);
      break;
    case BodyFamily::logistic:
      scale = rng.uniform(0.2, 1.5);
      p.body = BodyParams::logistic(rng.uniform(-3.0, 1.0), scale);
      break;
    case BodyFamily::mirrored_gamma: {
      const double shape = rng.uniform(1.5, 8.0);
      const double rate = rng.uniform(0.8, 5.0);
      scale = std::sqrt(shape) / rate;
      p.body = BodyParams::mirrored_gamma(shape, rate);
      break;
    }
    case BodyFamily::mirrored_lognormal: {
      const double nu = rng.uniform(-1.0, 1.0);
      const double w = rng.uniform(0.2, 0.8);
      scale = std::exp(nu) * w;
      p.body = BodyParams::mirrored_lognormal(nu, w);
      break;
    }
  }
  const double upper = is_mirrored(family) ? 0.0 : 1e6;
  p.tail.mu = body_quantile_below(rng.uniform(0.5, 0.95), p.body, upper);
  p.tail.sigma = scale * rng.uniform(0.1, 1.0);
  p.tail.xi = rng.uniform(-0.45, 0.45);
  return p;
}

inline double integrate(const auto& f, double a, double b, double* error = nullptr) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12, error);
}

// Integral of exp(hybrid_logpdf) split at the threshold, with the body
// piece split again a few scales below it.
inline double hybrid_mass(const HybridParams& p) {
  const auto dens = [&](double x) {
    const double lp = hybrid_logpdf(x, p);
    return lp == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(lp);
  };
  const double inf = std::numeric_limits<double>::infinity();
  const double mu = p.tail.mu;
  double total = 0.0;
  if (is_mirrored(p.body.family)) {
    total += integrate(dens, -inf, 10.0 * mu - 20.0);
    total += integrate(dens, 10.0 * mu - 20.0, mu);
  } else {
    const double cut = mu - 20.0 * p.body.second;
    total += integrate(dens, -inf, cut);
    total += integrate(dens, cut, mu);
  }
  if (p.tail.xi < 0.0) {
    total += integrate(dens, mu, mu - p.tail.sigma / p.tail.xi);
  } else {
    const double cut = mu + 50.0 * p.tail.sigma;
    total += integrate(dens, mu, cut);
    total += integrate(dens, cut, inf);
  }
  return total;
}

inline double ks_distance(std::vector<double> sample, const auto& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

// Ordinary least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// Brute-force quantile regression: an optimum interpolates p observations,
// so the minimum over all nonsingular p-subsets of the pinball objective is
// the exact optimum. Returns +inf when no subset is nonsingular.
inline double qr_bruteforce_objective(const std::vector<double>& y, const std::vector<std::vector<double>>& rows,
                                      double alpha) {
  const std::size_t n = y.size();
  const std::size_t p = rows.empty() ? 1 : rows[0].size() + 1;
  const auto design = [&](std::size_t i, std::size_t j) { return j == 0 ? 1.0 : rows[i][j - 1]; };
  const auto pinball = [&](double r) { return r >= 0.0 ? alpha * r : (alpha - 1.0) * r; };
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(p);
  for (std::size_t k = 0; k < p; ++k) idx[k] = k;
  while (true) {
    // Gaussian elimination with partial pivoting on the p x p system.
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1));
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < p; ++c) a[r][c] = design(idx[r], c);
      a[r][p] = y[idx[r]];
    }
    bool singular = false;
    for (std::size_t c = 0; c < p && !singular; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < p; ++r)
        if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
      if (std::fabs(a[piv][c]) < 1e-12) {
        singular = true;
        break;
      }
      std::swap(a[c], a[piv]);
      for (std::size_t r = 0; r < p; ++r) {
        if (r == c) continue;
        const double f = a[r][c] / a[c][c];
        for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
      }
    }
    if (!singular) {
      std::vector<double> beta(p);
      for (std::size_t c = 0; c < p; ++c) beta[c] = a[c][p] / a[c][c];
      double obj = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (std::size_t c = 0; c < p; ++c) pred += beta[c] * design(i, c);
        obj += pinball(y[i] - pred);
      }
      best = std::min(best, obj);
    }
    // next combination
    std::size_t k = p;
    while (k > 0 && idx[k - 1] == n - p + (k - 1)) --k;
    if (k == 0) break;
    ++idx[k - 1];
    for (std::size_t j = k; j < p; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

}  // namespace hpot::testing
