#include "hpot/risk.hpp"

#include <algorithm>
#include <cmath>

#include "hpot/errors.hpp"
#include "hpot/hierarchy.hpp"

namespace hpot {

double cycle_crash_risk(const GpdParams& tail) {
  validate(tail);
  if (!(tail.mu < 0.0)) throw InputError("crash risk: threshold must be negative (negated PET)");
  const double z = -tail.mu / tail.sigma;
  if (std::abs(tail.xi) < kXiZeroTolerance) return std::exp(-z);
  const double base = 1.0 + tail.xi * z;
  // xi < 0 and the bounded tail ends before 0.
  if (base <= 0.0) return 0.0;
  return std::exp(-std::log(base) / tail.xi);
}

double annualize(std::span<const double> risks, double t, double T) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InputError("annualize: observation duration must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw InputError("annualize: projection horizon must be non-negative");
  double s = 0.0;
  for (double r : risks) {
    if (!(r >= 0.0 && r <= 1.0)) throw InputError("annualize: risks must lie in [0, 1]");
    s += r;
  }
  return T / t * s;
}

std::vector<double> posterior_crash_counts(const PosteriorRun& run, const Dataset& data,
                                           std::span<const std::size_t> cycles, double t, double T) {
  if (run.cycles_fingerprint != data.cycles_fingerprint())
    throw InputError("risk: cycle table does not match the one the posterior was fitted to");
  if (run.sites != data.sites) throw InputError("risk: site list does not match the fitted run");
  for (std::size_t c : cycles)
    if (c >= data.cycles.size()) throw InputError("risk: cycle index out of range");
  const auto draws = run.pooled_draws();
  if (draws.empty()) throw InputError("risk: posterior has no draws");

  std::vector<double> counts;
  counts.reserve(draws.size());
  std::vector<double> r(cycles.size());
  for (const auto& theta : draws) {
    const CoefficientSet coeffs = from_scalars(theta, run.spec, run.sites);
    for (std::size_t k = 0; k < cycles.size(); ++k) {
      const std::size_t c = cycles[k];
      const HybridParams p = link_eval(coeffs, data.cycles[c], data.cycle_site[c], run.spec);
      if (!(p.tail.mu < 0.0))
        throw NumericalError("risk: posterior draw places the threshold at or above 0");
      r[k] = cycle_crash_risk(p.tail);
    }
    counts.push_back(annualize(r, t, T));
  }
  return counts;
}

CrashEstimate posterior_risk(const PosteriorRun& run, const Dataset& data, std::span<const std::size_t> cycles,
                             double t, double T) {
  auto counts = posterior_crash_counts(run, data, cycles, t, T);
  CrashEstimate e;
  e.samples = counts.size();
  double s = 0.0;
  for (double c : counts) s += c;
  e.mean = s / static_cast<double>(counts.size());
  std::sort(counts.begin(), counts.end());
  e.lo = sorted_quantile(counts, 0.025);
  e.hi = sorted_quantile(counts, 0.975);
  return e;
}

PoissonInterval poisson_ci(long long y0, double years) {
  if (y0 < 0) throw InputError("poisson_ci: crash count must be non-negative");
  if (!(years >= 1.0) || !std::isfinite(years)) throw InputError("poisson_ci: at least one year required");
  PoissonInterval ci;
  const double two_n = 2.0 * years;
  ci.mean = static_cast<double>(y0) / years;
  ci.lo = y0 == 0 ? 0.0 : chi2_quantile(0.025, static_cast<int>(2 * y0)) / two_n;
  ci.hi = chi2_quantile(0.975, static_cast<int>(2 * (y0 + 1))) / two_n;
  return ci;
}

}  // namespace hpot
