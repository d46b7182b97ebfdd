#include <benchmark/benchmark.h>

#include <vector>

#include "hpot/baselines.hpp"
#include "hpot/distmath.hpp"
#include "hpot/hybrid.hpp"
#include "hpot/rng.hpp"

namespace {

hpot::HybridParams lognormal() {
  hpot::HybridParams p;
  p.body = hpot::BodyParams::mirrored_lognormal(0.3, 0.35);
  p.tail = {-1.2, 0.2, -0.1};
  return p;
}

void BM_HybridLoglik(benchmark::State& state) {
  const auto p = lognormal();
  const auto x = hpot::hybrid_sample(static_cast<std::size_t>(state.range(0)), p, 1);
  const hpot::HybridDensity d(p);
  for (auto _ : state) benchmark::DoNotOptimize(d.loglik(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HybridLoglik)->Arg(10)->Arg(3000);

void BM_HybridSample(benchmark::State& state) {
  const auto p = lognormal();
  for (auto _ : state) benchmark::DoNotOptimize(hpot::hybrid_sample(1000, p, 2));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_HybridSample);

void BM_GpdMle(benchmark::State& state) {
  hpot::Rng rng(3);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = hpot::gpd_quantile(rng.uniform(), {0.0, 1.0, 0.1}) + 1e-12;
  for (auto _ : state) benchmark::DoNotOptimize(hpot::gpd_mle(x, 0.0));
}
BENCHMARK(BM_GpdMle)->Arg(500)->Arg(5000);

void BM_QuantileRegression(benchmark::State& state) {
  hpot::Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> y(n);
  std::vector<std::vector<double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i] = {rng.uniform(2.0, 28.0), rng.uniform(0.0, 4.5), rng.uniform(0.0, 1.9)};
    y[i] = -1.3 + 0.03 * rows[i][0] - 0.15 * rows[i][2] + 0.3 * rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(hpot::quantile_regression(y, rows, 0.85));
}
BENCHMARK(BM_QuantileRegression)->Arg(300)->Arg(3000);

}  // namespace
BENCHMARK_MAIN();
