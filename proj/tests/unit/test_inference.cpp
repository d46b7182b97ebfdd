#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "hpot/errors.hpp"
#include "hpot/inference.hpp"

using namespace hpot;
using doctest::Approx;

namespace {

// Independent Gaussian target with k coordinates, optionally centred at `centre`.
class GaussianTarget final : public MoveTarget {
 public:
  explicit GaussianTarget(std::vector<double> centre, std::vector<double> sd)
      : centre_(std::move(centre)), sd_(std::move(sd)), x_(centre_.size(), 0.0) {}

  std::size_t num_moves() const override { return x_.size(); }
  double initial_scale(std::size_t) const override { return 0.1; }
  double propose(std::size_t move, double step) override {
    staged_ = move;
    old_ = x_[move];
    x_[move] += step;
    return logd(move, x_[move]) - logd(move, old_);
  }
  void commit() override {}
  void discard() override { x_[staged_] = old_; }
  std::vector<std::string> scalar_names() const override {
    std::vector<std::string> n;
    for (std::size_t k = 0; k < x_.size(); ++k) n.push_back("x" + std::to_string(k));
    return n;
  }
  void write_scalars(std::span<double> out) const override { std::copy(x_.begin(), x_.end(), out.begin()); }

 private:
  double logd(std::size_t k, double v) const {
    const double z = (v - centre_[k]) / sd_[k];
    return -0.5 * z * z;
  }
  std::vector<double> centre_, sd_, x_;
  std::size_t staged_ = 0;
  double old_ = 0.0;
};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

std::vector<double> normal_draws(Rng& rng, std::size_t n, double mu, double sd) {
  std::vector<double> out(n);
  for (auto& v : out) v = mu + sd * rng.normal();
  return out;
}

HierarchicalProblem small_problem(std::uint64_t seed) {
  HierarchicalProblem prob;
  prob.spec.family = BodyFamily::mirrored_lognormal;
  prob.spec.links.of(Slot::mu) = {Covariate::shockwave_area};
  CoefficientSet truth = CoefficientSet::zeros(prob.spec.links, {"1", "2"});
  truth.of(Slot::mu).global = -1.25;
  truth.of(Slot::mu).offset = {0.03, -0.03};
  truth.of(Slot::mu).beta = {0.036};
  truth.of(Slot::mu).delta = 0.05;
  truth.of(Slot::phi).global = -1.6;
  truth.of(Slot::phi).offset = {0.0, 0.0};
  truth.of(Slot::body1).global = 0.3;
  truth.of(Slot::body1).offset = {0.0, 0.0};
  truth.of(Slot::body2).global = -1.2;
  truth.of(Slot::body2).offset = {0.0, 0.0};
  truth.xi = {-0.1, -0.1};
  Rng rng(seed);
  std::vector<CycleRecord> cycles;
  std::vector<ConflictObservation> obs;
  for (std::size_t s = 0; s < 2; ++s) {
    for (int k = 0; k < 60; ++k) {
      CycleRecord c{truth.site_ids[s], std::to_string(k), rng.uniform(2.0, 28.0), rng.uniform(0.0, 4.5), 0.5};
      for (double v : hybrid_sample(10, link_eval(truth, c, s, prob.spec), rng.engine()()))
        if (v < 0.0 && v >= -4.0) obs.push_back({c.site_id, c.cycle_id, -v});
      cycles.push_back(c);
    }
  }
  prob.data = Dataset::build(std::move(cycles), obs);
  return prob;
}

}  // namespace

TEST_CASE("config validation") {
  McmcConfig c;
  CHECK_NOTHROW(c.validate());
  c.burn_in = c.iterations;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = McmcConfig{};
  c.chains = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = McmcConfig{};
  c.thinning = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("standard normal toy target") {
  GaussianTarget target({0.0}, {1.0});
  McmcConfig c;
  c.iterations = 60000;
  c.burn_in = 10000;
  Rng rng(123);
  const ChainTrace t = run_adaptive_metropolis(target, c, rng);
  CHECK(t.draws.size() == 50000);
  const auto x = t.column(0);
  CHECK(std::fabs(variance(x) - 1.0) < 0.05);
  CHECK(t.acceptance[0] == Approx(0.44).epsilon(0.1));
  // adaptation stops at burn-in
  CHECK(t.scales_at_burn_in == t.scales_final);
  CHECK(t.iterations.front() == c.burn_in);
}

TEST_CASE("toy target: mean within 0.02 pooled over independent chains") {
  // 50k iterations per chain, five chains: the pooled standard error is well
  // under 0.01, so 0.02 is a real check on detailed balance.
  std::vector<double> all;
  for (std::uint64_t s = 0; s < 5; ++s) {
    GaussianTarget target({0.0}, {1.0});
    McmcConfig c;
    c.iterations = 55000;
    c.burn_in = 5000;
    Rng rng(1000 + s);
    const auto x = run_adaptive_metropolis(target, c, rng).column(0);
    all.insert(all.end(), x.begin(), x.end());
  }
  CHECK(std::fabs(mean(all)) < 0.02);
  CHECK(std::fabs(variance(all) - 1.0) < 0.05);
}

TEST_CASE("thinning keeps a subsequence of the same chain") {
  McmcConfig c;
  c.iterations = 3000;
  c.burn_in = 1000;
  GaussianTarget a({1.0, -2.0}, {1.0, 3.0}), b({1.0, -2.0}, {1.0, 3.0});
  Rng ra(5), rb(5);
  const ChainTrace full = run_adaptive_metropolis(a, c, ra);
  c.thinning = 7;
  const ChainTrace thin = run_adaptive_metropolis(b, c, rb);
  REQUIRE(thin.draws.size() == (2000 + 6) / 7);
  for (std::size_t i = 0; i < thin.draws.size(); ++i) {
    CHECK(thin.draws[i] == full.draws[i * 7]);
    CHECK(thin.iterations[i] == full.iterations[i * 7]);
  }
}

TEST_CASE("gelman_rubin examples") {
  Rng rng(77);
  const auto x = normal_draws(rng, 5000, 0.0, 1.0);
  std::vector<std::vector<double>> same{x, x};
  CHECK(gelman_rubin(same, false) <= 1.0 + 1e-6);
  std::vector<std::vector<double>> iid{normal_draws(rng, 10000, 0.0, 1.0), normal_draws(rng, 10000, 0.0, 1.0)};
  CHECK(gelman_rubin(iid) < 1.05);
  CHECK(gelman_rubin(iid, false) < 1.05);
  std::vector<std::vector<double>> apart{normal_draws(rng, 1000, 0.0, 1.0), normal_draws(rng, 1000, 100.0, 1.0)};
  CHECK(gelman_rubin(apart) > 5.0);
  CHECK(gelman_rubin(apart, false) > 5.0);

  // drift within each chain is what splitting catches
  std::vector<double> ramp(2000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 100.0 + rng.normal();
  std::vector<std::vector<double>> drift{ramp, ramp};
  CHECK(gelman_rubin(drift, false) <= 1.0 + 1e-6);
  CHECK(gelman_rubin(drift, true) > 2.0);

  std::vector<std::vector<double>> one{x};
  CHECK_THROWS_AS(gelman_rubin(one), InputError);
  std::vector<std::vector<double>> short_chains{{1, 2, 3}, {1, 2, 3}};
  CHECK_THROWS_AS(gelman_rubin(short_chains), InputError);
}

TEST_CASE("summaries") {
  std::vector<double> c(100, 2.5);
  const ScalarSummary s = summarize_scalar("c", c);
  CHECK(s.mean == 2.5);
  CHECK(s.sd == 0.0);
  CHECK(s.q025 == 2.5);
  CHECK(s.q975 == 2.5);

  std::vector<double> perm(10000);
  std::iota(perm.begin(), perm.end(), 1.0);
  Rng rng(3);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  const ScalarSummary q = summarize_scalar("p", perm);
  CHECK(q.q025 == Approx(250.975).epsilon(1e-12));
  CHECK(q.q975 == Approx(9750.025).epsilon(1e-12));
  CHECK(q.mean == Approx(5000.5));
  CHECK_THROWS_AS(summarize_scalar("e", std::vector<double>{}), InputError);

  ChainTrace a, b;
  a.names = b.names = {"x"};
  for (int i = 0; i < 50; ++i) a.draws.push_back({rng.normal()});
  for (int i = 0; i < 70; ++i) b.draws.push_back({rng.normal() + 1.0});
  std::vector<ChainTrace> ab{a, b}, ba{b, a};
  const auto s1 = summarize(ab)[0];
  const auto s2 = summarize(ba)[0];
  CHECK(s1.mean == Approx(s2.mean).epsilon(1e-14));
  CHECK(s1.sd == Approx(s2.sd).epsilon(1e-14));
  CHECK(s1.q025 == s2.q025);
  CHECK(s1.q975 == s2.q975);
}

TEST_CASE("compute_dic") {
  // degenerate posterior
  std::vector<std::vector<double>> same(20, std::vector<double>{0.3, -0.2});
  const auto quad = [](std::span<const double> t) { return 10.0 + t[0] * t[0] + t[1] * t[1]; };
  const DicResult d = compute_dic(same, quad);
  CHECK(d.pd == Approx(0.0).scale(1.0));
  CHECK(d.dic == Approx(d.dbar));

  // k normal means with flat priors: exact posterior draws give pD ~ k
  Rng rng(31);
  const std::size_t k = 4, n = 25;
  std::vector<std::vector<double>> y(k);
  for (std::size_t j = 0; j < k; ++j) y[j] = normal_draws(rng, n, static_cast<double>(j), 1.0);
  const auto deviance = [&](std::span<const double> theta) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      for (double v : y[j]) s += (v - theta[j]) * (v - theta[j]) + std::log(2.0 * std::numbers::pi);
    return s;
  };
  std::vector<std::vector<double>> post(20000, std::vector<double>(k));
  for (auto& row : post)
    for (std::size_t j = 0; j < k; ++j) row[j] = mean(y[j]) + rng.normal() / std::sqrt(static_cast<double>(n));
  const DicResult toy = compute_dic(post, deviance);
  CHECK(std::fabs(toy.pd - static_cast<double>(k)) < 0.5);
  CHECK(!toy.median_plugin);

  // posterior mean outside support -> median plug-in
  std::vector<std::vector<double>> bimodal;
  for (int i = 0; i < 12; ++i) bimodal.push_back({i < 5 ? -2.0 : 2.0});
  const auto only_tails = [](std::span<const double> t) {
    return std::fabs(t[0]) > 1.0 ? t[0] * t[0] : std::numeric_limits<double>::infinity();
  };
  const DicResult m = compute_dic(bimodal, only_tails);
  CHECK(m.median_plugin);
  CHECK(std::isfinite(m.dic));
  const auto nowhere = [](std::span<const double> t) {
    return std::fabs(t[0]) == 2.0 ? 4.0 : std::numeric_limits<double>::infinity();
  };
  std::vector<std::vector<double>> centred{{-2.0}, {2.0}, {-2.0}, {2.0}};
  CHECK_THROWS_AS(compute_dic(centred, nowhere), NumericalError);
}

TEST_CASE("compare_models") {
  std::vector<ModelComparisonInput> two{{"a", 100.0, 1}, {"b", 103.0, 1}};
  auto r = compare_models(two);
  CHECK(r[0].label == "a");
  CHECK(r[0].verdict == "best");
  CHECK(r[1].verdict == "competitive");
  two[1].dic = 115.0;
  r = compare_models(two);
  CHECK(r[1].verdict == "decisive");
  CHECK(r[1].delta == 15.0);
  two[1].dic = 107.0;
  CHECK(compare_models(two)[1].verdict == "inconclusive");
  two[1].dic = 90.0;
  r = compare_models(two);
  CHECK(r[0].label == "b");
  two[1].dataset_fingerprint = 2;
  CHECK_THROWS_AS(compare_models(two), InputError);
  std::vector<ModelComparisonInput> one{{"a", 1.0, 1}};
  CHECK_THROWS_AS(compare_models(one), InputError);
}

TEST_CASE("hierarchical fit on a small synthetic problem") {
  const HierarchicalProblem prob = small_problem(21);
  McmcConfig c;
  c.chains = 2;
  c.iterations = 6000;
  c.burn_in = 3000;
  c.seed = 9;

  const ChainTrace t1 = run_chain(prob, c, 1);
  const ChainTrace t1b = run_chain(prob, c, 1);
  CHECK(t1.draws == t1b.draws);
  CHECK(t1.scales_at_burn_in == t1.scales_final);
  // Per-move rates drift with the offset scale (delta), so only the average
  // is held to the target; single moves just must not be stuck or wasteful.
  double mean_acc = 0.0;
  for (std::size_t k = 0; k < t1.acceptance.size(); ++k) {
    const double a = t1.acceptance[k];
    INFO("move " << k);
    CHECK(a >= 0.1);
    CHECK(a <= 0.8);
    mean_acc += a / static_cast<double>(t1.acceptance.size());
  }
  CHECK(mean_acc >= 0.34);
  CHECK(mean_acc <= 0.54);
  const ChainTrace t0 = run_chain(prob, c, 0);
  CHECK(t0.draws != t1.draws);

  const PosteriorRun run = fit(prob, c);
  CHECK(run.chains[1].draws == t1.draws);
  CHECK(run.rhat.size() == run.names.size());
  CHECK(run.dataset_fingerprint == prob.data.fingerprint());
  for (const auto& ch : run.chains)
    for (const auto& row : ch.draws) CHECK(row.size() == run.names.size());
  const PosteriorRun again = fit(prob, c);
  CHECK(again.dic.dic == run.dic.dic);
  CHECK(again.summaries[0].mean == run.summaries[0].mean);

  // DIC from every 5th draw agrees with the full trace
  const auto pooled = run.pooled_draws();
  std::vector<std::vector<double>> thinned;
  for (std::size_t i = 0; i < pooled.size(); i += 5) thinned.push_back(pooled[i]);
  const DicResult full = dic(pooled, prob);
  const DicResult sub = dic(thinned, prob);
  // tolerance: 4 Monte Carlo standard errors of the mean deviance of the
  // thinned set, from batch means over 10 batches
  std::vector<double> dev;
  for (const auto& row : thinned) dev.push_back(-2.0 * data_loglik(from_scalars(row, prob.spec, run.sites), prob.data, prob.spec));
  const std::size_t nb = 10, bs = dev.size() / nb;
  std::vector<double> batch(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < bs; ++i) batch[b] += dev[b * bs + i] / static_cast<double>(bs);
  double bm = 0.0, bv = 0.0;
  for (double v : batch) bm += v / nb;
  for (double v : batch) bv += (v - bm) * (v - bm) / (nb - 1);
  const double mcse = std::sqrt(bv / nb);
  INFO("mcse " << mcse);
  CHECK(std::fabs(full.dic - sub.dic) < 4.0 * mcse);
  CHECK(full.dic == Approx(run.dic.dic));

  McmcConfig single = c;
  single.chains = 1;
  const PosteriorRun solo = fit(prob, single);
  CHECK(std::isnan(solo.rhat[0]));
}

TEST_CASE("initial values are finite and chains differ") {
  const HierarchicalProblem prob = small_problem(3);
  const CoefficientSet a = initial_coefficients(prob, 0, 1);
  const CoefficientSet b = initial_coefficients(prob, 1, 1);
  CHECK(std::isfinite(log_posterior(a, prob.data, prob.spec)));
  CHECK(std::isfinite(log_posterior(b, prob.data, prob.spec)));
  CHECK(a.of(Slot::mu).site_intercept(0) != b.of(Slot::mu).site_intercept(0));
  CHECK(std::fabs(a.of(Slot::mu).site_intercept(0) - b.of(Slot::mu).site_intercept(0)) <= 0.25);
  CHECK(a.xi[0] == -0.1);
}
