#pragma once

// Adaptive Metropolis-within-Gibbs sampling, convergence diagnostics,
// posterior summaries and DIC.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hpot/hierarchy.hpp"
#include "hpot/rng.hpp"

namespace hpot {

struct McmcConfig {
  std::size_t chains = 2;
  std::size_t iterations = 80000;
  std::size_t burn_in = 40000;
  std::uint64_t seed = 1;
  double target_acceptance = 0.44;
  // Robbins-Monro step size decays as (1 + t / adaptation_window)^-0.6.
  std::size_t adaptation_window = 50;
  std::size_t thinning = 1;

  void validate() const;
};

// A target explored by one-dimensional random-walk moves. Move k displaces the
// state by `step` along a fixed direction; propose() returns the log density
// ratio of the displaced state to the current one (including any Jacobian)
// and stages it until commit() or discard().
class MoveTarget {
 public:
  virtual ~MoveTarget() = default;
  virtual std::size_t num_moves() const = 0;
  virtual double initial_scale(std::size_t move) const = 0;
  virtual double propose(std::size_t move, double step) = 0;
  virtual void commit() = 0;
  virtual void discard() = 0;
  virtual std::vector<std::string> scalar_names() const = 0;
  virtual void write_scalars(std::span<double> out) const = 0;
};

struct ChainTrace {
  std::vector<std::string> names;
  std::vector<std::size_t> iterations;      // iteration index of each kept draw
  std::vector<std::vector<double>> draws;   // draws[i][k]: kept draw i, scalar k
  std::vector<double> acceptance;           // per move, post burn-in
  std::vector<double> scales_at_burn_in;    // proposal scales when adaptation stopped
  std::vector<double> scales_final;

  std::vector<double> column(std::size_t k) const;
};

ChainTrace run_adaptive_metropolis(MoveTarget& target, const McmcConfig& config, Rng& rng);

struct HierarchicalProblem {
  ModelSpec spec;
  Dataset data;
};

// Sampler over a CoefficientSet. Moves, in scalar order:
//   <p>.global       b += d, epsilon_i -= d      (site intercepts fixed)
//   <p>.intercept[i] epsilon_i += d
//   <p>.beta[c]      beta_c += d, b -= d * mean(c) (predictor at mean covariate fixed)
//   <p>.delta        log delta += d
//   xi[i]            xi_i += d
// followed by one extra move per site that raises mu_i by d and resets
// sigma_i to sigma_i + xi_i * d, the scale a GPD has above a higher threshold.
// Shears have unit Jacobian; the log-delta and threshold moves carry theirs.
class HierarchicalTarget final : public MoveTarget {
 public:
  HierarchicalTarget(const HierarchicalProblem& problem, CoefficientSet start);

  std::size_t num_moves() const override { return moves_.size(); }
  double initial_scale(std::size_t move) const override;
  double propose(std::size_t move, double step) override;
  void commit() override;
  void discard() override;
  std::vector<std::string> scalar_names() const override;
  void write_scalars(std::span<double> out) const override;

  const CoefficientSet& state() const { return state_; }
  double log_density() const { return log_prior_ + total_loglik(); }

 private:
  enum class Kind { global, intercept, beta, delta, xi, threshold };
  struct Move {
    Kind kind;
    std::size_t slot;
    std::size_t index;  // site or covariate position
  };

  double total_loglik() const;

  const HierarchicalProblem& problem_;
  CoefficientSet state_;
  std::vector<Move> moves_;
  std::array<std::vector<double>, kNumSlots> covariate_means_;
  std::vector<double> site_ll_;
  double log_prior_ = 0.0;

  // Staged proposal.
  std::size_t staged_move_ = 0;
  LinkedCoefficients backup_linked_;
  LinkedCoefficients backup_phi_;
  double backup_xi_ = 0.0;
  std::vector<double> backup_site_ll_;
  double backup_prior_ = 0.0;
};

// Starting values: mu intercepts at the per-site 85% quantile, phi at the log
// sd of the exceedances, body parameters by moments of the sub-threshold data,
// xi = -0.1. Chains after the first jitter the site intercepts by U(-0.25, 0.25).
// Falls back to xi = 0.1 and then to the unjittered start when the posterior is
// not finite; throws NumericalError naming the failing component otherwise.
CoefficientSet initial_coefficients(const HierarchicalProblem& problem, std::size_t chain_index,
                                    std::uint64_t seed);

ChainTrace run_chain(const HierarchicalProblem& problem, const McmcConfig& config, std::size_t chain_index);

// Potential scale reduction. With split = true every chain is halved first.
double gelman_rubin(std::span<const std::vector<double>> chains, bool split = true);

struct ScalarSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

// Linear-interpolation quantile of already-sorted values.
double sorted_quantile(std::span<const double> sorted, double p);
ScalarSummary summarize_scalar(std::string name, std::span<const double> values);
// Pools all chains.
std::vector<ScalarSummary> summarize(std::span<const ChainTrace> chains);

struct DicResult {
  double dbar = 0.0;
  double pd = 0.0;
  double dic = 0.0;
  double d_at_plugin = 0.0;
  bool median_plugin = false;  // posterior mean was outside the support
};

// `deviance(theta)` is -2 log-likelihood. Plug-in is the per-scalar posterior
// mean, falling back to the per-scalar median.
DicResult compute_dic(std::span<const std::vector<double>> draws,
                      const std::function<double(std::span<const double>)>& deviance);

struct PosteriorRun {
  ModelSpec spec;
  std::vector<std::string> sites;
  std::vector<std::string> names;
  McmcConfig config;
  std::vector<ChainTrace> chains;
  std::vector<double> rhat;  // per scalar; NaN with a single chain
  std::vector<ScalarSummary> summaries;
  DicResult dic;
  std::uint64_t dataset_fingerprint = 0;
  std::uint64_t cycles_fingerprint = 0;

  // All kept draws, chain after chain.
  std::vector<std::vector<double>> pooled_draws() const;
};

DicResult dic(std::span<const std::vector<double>> draws, const HierarchicalProblem& problem);

// Runs config.chains chains (in parallel threads), then diagnostics.
PosteriorRun fit(const HierarchicalProblem& problem, const McmcConfig& config);

struct RankedModel {
  std::string label;
  double dic = 0.0;
  double delta = 0.0;    // DIC - best DIC
  std::string verdict;   // "best", "competitive", "inconclusive", "decisive"
};

struct ModelComparisonInput {
  std::string label;
  double dic = 0.0;
  std::uint64_t dataset_fingerprint = 0;
};

// Sorts by DIC; |delta| < 5 is competitive with the best, > 10 decisively
// favours the best. Mismatched fingerprints are an InputError.
std::vector<RankedModel> compare_models(std::span<const ModelComparisonInput> runs);

}  // namespace hpot
