#pragma once

// Crash risk from a fitted tail: probability per cycle that negated PET
// passes 0, projection to a longer horizon and posterior propagation, plus
// the exact Poisson interval for observed crash counts.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hpot/distmath.hpp"
#include "hpot/inference.hpp"

namespace hpot {

// P(X > 0) under the GPD tail. Exactly 0 when xi < 0 and the endpoint
// mu - sigma/xi does not reach 0. mu >= 0 is an InputError.
double cycle_crash_risk(const GpdParams& tail);

// (T / t) * sum(risks). t and T must share units; t <= 0 is an InputError.
double annualize(std::span<const double> risks, double t, double T);

struct CrashEstimate {
  double mean = 0.0;
  double lo = 0.0;  // 2.5%
  double hi = 0.0;  // 97.5%
  std::size_t samples = 0;
};

// Per-posterior-draw crash count over `cycles` (which may span several
// sites), summarized by mean and 2.5/97.5 percentiles. The cycles must be
// the ones the run was fitted to (fingerprint check).
CrashEstimate posterior_risk(const PosteriorRun& run, const Dataset& data, std::span<const std::size_t> cycles,
                             double t, double T);

// Per-draw crash counts behind posterior_risk.
std::vector<double> posterior_crash_counts(const PosteriorRun& run, const Dataset& data,
                                           std::span<const std::size_t> cycles, double t, double T);

struct PoissonInterval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Annual-mean interval for y0 crashes observed over n years.
PoissonInterval poisson_ci(long long y0, double years);

}  // namespace hpot
