#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "doctest.h"
#include "hpot/errors.hpp"
#include "hpot/hybrid.hpp"
#include "support.hpp"

using namespace hpot;
using doctest::Approx;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

HybridParams lognormal_example() {
  HybridParams p;
  p.body = BodyParams::mirrored_lognormal(0.3, 0.35);
  p.tail = {-1.2, 0.2, -0.1};
  return p;
}

// Written out directly from the lognormal-GPD likelihood, sharing no code
// with the library.
double naive_lognormal_loglik(const std::vector<double>& x, double nu, double w, double mu, double sigma,
                              double xi) {
  const auto phi = [](double z) { return 0.5 * boost::math::erfc(-z / std::numbers::sqrt2); };
  const double tail_mass = phi((std::log(-mu) - nu) / w);
  double total = 0.0;
  for (double v : x) {
    if (v < mu) {
      const double y = -v;
      const double z = (std::log(y) - nu) / w;
      total += std::log(1.0 / (y * w * std::sqrt(2.0 * std::numbers::pi)) * std::exp(-0.5 * z * z));
    } else {
      total += std::log(tail_mass / sigma * std::pow(1.0 + xi * (v - mu) / sigma, -1.0 / xi - 1.0));
    }
  }
  return total;
}
}  // namespace

TEST_CASE("validation") {
  HybridParams p = lognormal_example();
  CHECK_NOTHROW(validate(p));
  p.tail.mu = 0.1;
  CHECK_THROWS_AS(validate(p), InputError);
  CHECK(!is_valid(p));
  p = lognormal_example();
  p.tail.xi = 1.0;
  CHECK_THROWS_AS(hybrid_cdf(-1.0, p), InputError);
  p.tail.xi = 0.1;
  p.tail.sigma = 0.0;
  CHECK_THROWS_AS(hybrid_logpdf(-1.0, p), InputError);
  CHECK(!HybridDensity(p).valid());
  CHECK(HybridDensity(p).logpdf(-1.0) == -kInf);
  // non-mirrored bodies accept a positive threshold
  HybridParams n{BodyParams::normal(0.0, 1.0), {0.5, 1.0, 0.1}};
  CHECK(is_valid(n));
}

TEST_CASE("cdf examples") {
  const HybridParams p = lognormal_example();
  const double fmu = body_cdf(p.tail.mu, p.body);
  CHECK(hybrid_cdf(p.tail.mu, p) == fmu);
  CHECK(std::fabs(hybrid_cdf(std::nextafter(p.tail.mu, -kInf), p) - fmu) < 1e-12);
  CHECK(hybrid_cdf(-1.2 + 100.0, p) == 1.0);  // past the xi < 0 endpoint

  // F_body(mu) = 0.8, x at GPD median -> 0.9
  HybridParams n{BodyParams::normal(0.0, 1.0), {}};
  n.tail.mu = body_quantile_below(0.8, n.body, 10.0);
  n.tail.sigma = 0.7;
  n.tail.xi = 0.2;
  CHECK(body_cdf(n.tail.mu, n.body) == Approx(0.8).epsilon(1e-12));
  const double median = gpd_quantile(0.5, n.tail);
  CHECK(hybrid_cdf(median, n) == Approx(0.9).epsilon(1e-12));
  CHECK(std::fabs(hybrid_cdf(1e300, n) - 1.0) < 1e-12);
  CHECK(hybrid_cdf(-1e300, n) == 0.0);
}

TEST_CASE("logpdf branches") {
  const HybridParams p = lognormal_example();
  for (double x : {-3.0, -2.0, -1.5, -1.2000001}) CHECK(hybrid_logpdf(x, p) == Approx(body_logpdf(x, p.body)));
  for (double x : {-1.2, -1.0, -0.5}) {
    const double expect = std::log(body_sf(p.tail.mu, p.body)) + gpd_logpdf(x, p.tail);
    CHECK(hybrid_logpdf(x, p) == Approx(expect).epsilon(1e-13));
  }
  CHECK(hybrid_logpdf(1.0, p) == -kInf);              // beyond the tail endpoint 0.8
  CHECK(hybrid_logpdf(kInf, p) == -kInf);
}

TEST_CASE("loglik") {
  const HybridParams p = lognormal_example();
  const std::vector<double> one{-1.1};
  CHECK(hybrid_loglik(one, p) == hybrid_logpdf(-1.1, p));
  const auto a = hybrid_sample(37, p, 1);
  const auto b = hybrid_sample(61, p, 2);
  std::vector<double> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  CHECK(hybrid_loglik(ab, p) == Approx(hybrid_loglik(a, p) + hybrid_loglik(b, p)).epsilon(1e-13));
  CHECK_THROWS_AS(hybrid_loglik(std::vector<double>{}, p), InputError);
  std::vector<double> bad = a;
  bad.push_back(5.0);
  CHECK(hybrid_loglik(bad, p) == -kInf);

  const auto x = hybrid_sample(100, p, 3);
  const double oracle = naive_lognormal_loglik(x, 0.3, 0.35, -1.2, 0.2, -0.1);
  CHECK(std::fabs(hybrid_loglik(x, p) - oracle) < 1e-10);
}

TEST_CASE("sampling") {
  const HybridParams p = lognormal_example();
  CHECK(hybrid_sample(500, p, 42) == hybrid_sample(500, p, 42));
  CHECK(hybrid_sample(500, p, 42) != hybrid_sample(500, p, 43));
  CHECK_THROWS_AS(hybrid_sample(0, p, 1), InputError);

  const auto x = hybrid_sample(100000, p, 17);
  std::size_t above = 0;
  for (double v : x) above += v >= p.tail.mu;
  CHECK(std::fabs(static_cast<double>(above) / 1e5 - body_sf(p.tail.mu, p.body)) < 0.01);
  CHECK(testing::ks_distance(x, [&](double v) { return hybrid_cdf(v, p); }) < 0.01);
}

TEST_CASE("body_quantile_below inverts the truncated body") {
  Rng rng(8);
  for (BodyFamily fam : kAllBodyFamilies) {
    for (int i = 0; i < 50; ++i) {
      const HybridParams h = testing::random_hybrid(fam, rng);
      const double cap = body_cdf(h.tail.mu, h.body);
      const double u = rng.uniform(0.0, cap);
      const double x = body_quantile_below(u, h.body, h.tail.mu);
      CHECK(x <= h.tail.mu);
      CHECK(std::fabs(body_cdf(x, h.body) - u) < 1e-10);
    }
  }
  CHECK_THROWS_AS(body_quantile_below(0.9, BodyParams::normal(0.0, 1.0), 0.0), InputError);
}

TEST_CASE("properties over random parameters of every family") {
  Rng rng(2024);
  for (BodyFamily fam : kAllBodyFamilies) {
    CAPTURE(to_string(fam));
    for (int i = 0; i < 40; ++i) {
      const HybridParams p = testing::random_hybrid(fam, rng);
      const double mu = p.tail.mu;
      CHECK(std::fabs(hybrid_cdf(mu, p) - hybrid_cdf(std::nextafter(mu, -kInf), p)) < 1e-12);
      CHECK(std::fabs(testing::hybrid_mass(p) - 1.0) < 1e-6);

      // monotone on a grid spanning the support
      const double lo = mu - 30.0 * (p.body.second + 1.0);
      const double hi = p.tail.xi < 0.0 ? mu - p.tail.sigma / p.tail.xi + 1.0 : mu + 100.0 * p.tail.sigma;
      double prev = 0.0;
      for (int k = 0; k <= 2000; ++k) {
        const double f = hybrid_cdf(lo + (hi - lo) * k / 2000.0, p);
        CHECK(f >= prev);
        prev = f;
      }
      // finite on support
      const auto x = hybrid_sample(200, p, static_cast<std::uint64_t>(i));
      CHECK(std::isfinite(hybrid_loglik(x, p)));
    }
  }
}
