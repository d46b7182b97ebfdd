#include "hpot/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "hpot/errors.hpp"

namespace hpot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInitialScale = 0.1;
constexpr double kInitQuantile = 0.85;
constexpr double kInitXi = -0.1;
constexpr double kFallbackXi = 0.1;
constexpr double kJitter = 0.25;
// Seeds the initial-value jitter apart from the sampling streams.
constexpr std::uint64_t kInitStreamOffset = 0x9e3779b97f4a7c15ULL;

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double quantile_of(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, p);
}

}  // namespace

void McmcConfig::validate() const {
  if (chains < 1) throw InputError("mcmc: at least one chain required");
  if (iterations == 0) throw InputError("mcmc: iterations must be positive");
  if (burn_in >= iterations) throw InputError("mcmc: burn_in must be smaller than iterations");
  if (thinning < 1) throw InputError("mcmc: thinning must be at least 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw InputError("mcmc: target_acceptance must be in (0, 1)");
  if (adaptation_window < 1) throw InputError("mcmc: adaptation_window must be at least 1");
}

std::vector<double> ChainTrace::column(std::size_t k) const {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d.at(k));
  return out;
}

ChainTrace run_adaptive_metropolis(MoveTarget& target, const McmcConfig& config, Rng& rng) {
  config.validate();
  const std::size_t m = target.num_moves();
  ChainTrace trace;
  trace.names = target.scalar_names();
  std::vector<double> log_scale(m);
  for (std::size_t k = 0; k < m; ++k) log_scale[k] = std::log(target.initial_scale(k));
  std::vector<std::size_t> accepted(m, 0);
  const std::size_t kept = (config.iterations - config.burn_in + config.thinning - 1) / config.thinning;
  trace.draws.reserve(kept);
  trace.iterations.reserve(kept);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const bool adapting = it < config.burn_in;
    if (it == config.burn_in) {
      trace.scales_at_burn_in.resize(m);
      for (std::size_t k = 0; k < m; ++k) trace.scales_at_burn_in[k] = std::exp(log_scale[k]);
    }
    const double gain =
        std::pow(1.0 + static_cast<double>(it) / static_cast<double>(config.adaptation_window), -0.6);
    for (std::size_t k = 0; k < m; ++k) {
      const double step = std::exp(log_scale[k]) * rng.normal();
      const double lr = target.propose(k, step);
      const double u = rng.uniform();
      const bool accept = lr >= 0.0 || std::log(u) < lr;
      if (accept)
        target.commit();
      else
        target.discard();
      if (adapting) {
        const double a = lr >= 0.0 ? 1.0 : (std::isfinite(lr) ? std::exp(lr) : 0.0);
        log_scale[k] += gain * (a - config.target_acceptance);
      } else if (accept) {
        ++accepted[k];
      }
    }
    if (!adapting && (it - config.burn_in) % config.thinning == 0) {
      std::vector<double> row(trace.names.size());
      target.write_scalars(row);
      trace.draws.push_back(std::move(row));
      trace.iterations.push_back(it);
    }
  }

  const double post = static_cast<double>(config.iterations - config.burn_in);
  trace.acceptance.resize(m);
  trace.scales_final.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    trace.acceptance[k] = static_cast<double>(accepted[k]) / post;
    trace.scales_final[k] = std::exp(log_scale[k]);
  }
  if (trace.scales_at_burn_in.empty()) trace.scales_at_burn_in = trace.scales_final;
  return trace;
}

// ---------------------------------------------------------------------------

HierarchicalTarget::HierarchicalTarget(const HierarchicalProblem& problem, CoefficientSet start)
    : problem_(problem), state_(std::move(start)) {
  check_shape(state_, problem_.spec.links);
  if (state_.site_ids != problem_.data.sites)
    throw InputError("sampler: coefficient sites do not match the data");
  const std::size_t n = state_.site_ids.size();
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    moves_.push_back({Kind::global, s, 0});
    for (std::size_t i = 0; i < n; ++i) moves_.push_back({Kind::intercept, s, i});
    const auto& covs = problem_.spec.links.covariates[s];
    for (std::size_t k = 0; k < covs.size(); ++k) {
      moves_.push_back({Kind::beta, s, k});
      std::vector<double> col;
      for (const auto& c : problem_.data.cycles) col.push_back(c.covariate(covs[k]));
      covariate_means_[s].push_back(mean_of(col));
    }
    moves_.push_back({Kind::delta, s, 0});
  }
  for (std::size_t i = 0; i < n; ++i) moves_.push_back({Kind::xi, 0, i});
  for (std::size_t i = 0; i < n; ++i) moves_.push_back({Kind::threshold, 0, i});

  log_prior_ = log_prior(state_);
  site_ll_.resize(n);
  for (std::size_t i = 0; i < n; ++i) site_ll_[i] = site_loglik(state_, problem_.data, problem_.spec, i);
}

double HierarchicalTarget::initial_scale(std::size_t move) const {
  const Move& mv = moves_.at(move);
  if (mv.kind != Kind::beta) return kInitialScale;
  const Covariate c = problem_.spec.links.covariates[mv.slot][mv.index];
  std::vector<double> col;
  for (const auto& cyc : problem_.data.cycles) col.push_back(cyc.covariate(c));
  const double sd = std::sqrt(var_of(col));
  return sd > 1e-8 ? kInitialScale / sd : kInitialScale;
}

double HierarchicalTarget::total_loglik() const {
  double t = 0.0;
  for (double v : site_ll_) t += v;
  return t;
}

double HierarchicalTarget::propose(std::size_t move, double step) {
  const Move& mv = moves_.at(move);
  staged_move_ = move;
  LinkedCoefficients& lc = state_.linked[mv.slot];
  backup_linked_ = lc;
  if (mv.kind == Kind::threshold) backup_phi_ = state_.of(Slot::phi);
  backup_xi_ = mv.kind == Kind::xi ? state_.xi[mv.index] : 0.0;
  backup_site_ll_ = site_ll_;
  backup_prior_ = log_prior_;
  const double before = log_prior_ + total_loglik();

  double jacobian = 0.0;
  bool all_sites = false;
  std::size_t one_site = state_.site_ids.size();  // none
  switch (mv.kind) {
    case Kind::global:
      lc.global += step;
      for (double& e : lc.offset) e -= step;
      break;
    case Kind::intercept:
      lc.offset[mv.index] += step;
      one_site = mv.index;
      break;
    case Kind::beta:
      lc.beta[mv.index] += step;
      lc.global -= step * covariate_means_[mv.slot][mv.index];
      all_sites = true;
      break;
    case Kind::delta:
      lc.delta *= std::exp(step);
      jacobian = step;
      break;
    case Kind::xi:
      state_.xi[mv.index] += step;
      one_site = mv.index;
      break;
    case Kind::threshold: {
      // Above a raised threshold a GPD stays a GPD with scale sigma + xi * d;
      // move mu and phi together along that curve.
      auto& phi = state_.of(Slot::phi);
      const double before_phi = phi.site_intercept(mv.index);
      const double sigma = std::exp(before_phi) + state_.xi[mv.index] * step;
      state_.of(Slot::mu).offset[mv.index] += step;
      if (!(sigma > 0.0)) return -kInf;
      const double after_phi = std::log(sigma);
      phi.offset[mv.index] += after_phi - before_phi;
      jacobian = before_phi - after_phi;
      one_site = mv.index;
      break;
    }
  }

  log_prior_ = log_prior(state_);
  if (log_prior_ == -kInf) return -kInf;
  if (all_sites) {
    for (std::size_t i = 0; i < site_ll_.size(); ++i) {
      site_ll_[i] = site_loglik(state_, problem_.data, problem_.spec, i);
      if (site_ll_[i] == -kInf) return -kInf;
    }
  } else if (one_site < site_ll_.size()) {
    site_ll_[one_site] = site_loglik(state_, problem_.data, problem_.spec, one_site);
    if (site_ll_[one_site] == -kInf) return -kInf;
  }
  const double after = log_prior_ + total_loglik();
  return std::isnan(after) ? -kInf : after - before + jacobian;
}

void HierarchicalTarget::commit() {}

void HierarchicalTarget::discard() {
  const Move& mv = moves_.at(staged_move_);
  state_.linked[mv.slot] = backup_linked_;
  if (mv.kind == Kind::xi) state_.xi[mv.index] = backup_xi_;
  if (mv.kind == Kind::threshold) state_.of(Slot::phi) = backup_phi_;
  site_ll_ = backup_site_ll_;
  log_prior_ = backup_prior_;
}

std::vector<std::string> HierarchicalTarget::scalar_names() const {
  return hpot::scalar_names(problem_.spec, state_.site_ids);
}

void HierarchicalTarget::write_scalars(std::span<double> out) const {
  const auto v = to_scalars(state_, problem_.spec);
  std::copy(v.begin(), v.end(), out.begin());
}

// ---------------------------------------------------------------------------

namespace {

struct SiteStart {
  std::array<double, kNumSlots> eta{};
};

SiteStart site_start(const std::vector<double>& values, BodyFamily family, const std::string& site) {
  if (values.size() < 4) throw InputError("site '" + site + "' has too few conflicts to initialize");
  SiteStart st;
  const double mu = quantile_of(values, kInitQuantile);
  std::vector<double> below, above;
  for (double v : values) (v > mu ? above : below).push_back(v);
  if (below.size() < 2 || above.size() < 2)
    throw InputError("site '" + site + "' has too few distinct conflicts to initialize");
  st.eta[0] = mu;
  st.eta[1] = std::log(std::max(std::sqrt(var_of(above)), 1e-3));

  const double m = mean_of(below);
  const double sd = std::max(std::sqrt(var_of(below)), 1e-3);
  switch (family) {
    case BodyFamily::normal:
      st.eta[2] = m;
      st.eta[3] = std::log(sd);
      break;
    case BodyFamily::cauchy: {
      const double q1 = quantile_of(below, 0.25), q2 = quantile_of(below, 0.5), q3 = quantile_of(below, 0.75);
      st.eta[2] = q2;
      st.eta[3] = std::log(std::max((q3 - q1) / 2.0, 1e-3));
      break;
    }
    case BodyFamily::logistic:
      st.eta[2] = m;
      st.eta[3] = std::log(sd * std::sqrt(3.0) / std::numbers::pi);
      break;
    case BodyFamily::mirrored_gamma: {
      std::vector<double> pos;
      for (double v : below) pos.push_back(-v);
      const double pm = mean_of(pos);
      const double pv = std::max(var_of(pos), 1e-6);
      st.eta[2] = std::log(pm * pm / pv);
      st.eta[3] = std::log(pm / pv);
      break;
    }
    case BodyFamily::mirrored_lognormal: {
      std::vector<double> logs;
      for (double v : below) logs.push_back(std::log(-v));
      st.eta[2] = mean_of(logs);
      st.eta[3] = std::log(std::max(std::sqrt(var_of(logs)), 1e-3));
      break;
    }
  }
  return st;
}

// Names the first non-finite piece of the posterior, or returns empty.
std::string failing_component(const CoefficientSet& c, const HierarchicalProblem& problem) {
  if (!std::isfinite(log_prior(c))) return "prior";
  for (std::size_t i = 0; i < c.site_ids.size(); ++i)
    if (!std::isfinite(site_loglik(c, problem.data, problem.spec, i)))
      return "likelihood at site '" + c.site_ids[i] + "'";
  return {};
}

}  // namespace

CoefficientSet initial_coefficients(const HierarchicalProblem& problem, std::size_t chain_index,
                                    std::uint64_t seed) {
  const auto& data = problem.data;
  if (data.num_observations() == 0) throw InputError("no conflicts to fit");
  const std::size_t n = data.sites.size();
  std::vector<SiteStart> starts;
  for (std::size_t i = 0; i < n; ++i)
    starts.push_back(site_start(data.site_values(i), problem.spec.family, data.sites[i]));

  CoefficientSet base = CoefficientSet::zeros(problem.spec.links, data.sites);
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    std::vector<double> inits;
    for (const auto& st : starts) inits.push_back(st.eta[s]);
    auto& lc = base.linked[s];
    lc.global = mean_of(inits);
    for (std::size_t i = 0; i < n; ++i) lc.offset[i] = inits[i] - lc.global;
    lc.delta = std::max(std::sqrt(var_of(inits)), 0.1);
  }

  CoefficientSet jittered = base;
  if (chain_index > 0) {
    Rng rng(seed ^ kInitStreamOffset, chain_index);
    for (auto& lc : jittered.linked)
      for (double& e : lc.offset) e += rng.uniform(-kJitter, kJitter);
  }

  for (const CoefficientSet* candidate : {&jittered, &base}) {
    for (double xi : {kInitXi, kFallbackXi}) {
      CoefficientSet c = *candidate;
      std::fill(c.xi.begin(), c.xi.end(), xi);
      if (failing_component(c, problem).empty()) return c;
    }
  }
  CoefficientSet c = base;
  std::fill(c.xi.begin(), c.xi.end(), kInitXi);
  throw NumericalError("initial posterior is not finite: " + failing_component(c, problem));
}

ChainTrace run_chain(const HierarchicalProblem& problem, const McmcConfig& config, std::size_t chain_index) {
  config.validate();
  HierarchicalTarget target(problem, initial_coefficients(problem, chain_index, config.seed));
  Rng rng(config.seed, chain_index);
  return run_adaptive_metropolis(target, config, rng);
}

// ---------------------------------------------------------------------------

double gelman_rubin(std::span<const std::vector<double>> chains, bool split) {
  if (chains.size() < 2) throw InputError("gelman_rubin: at least two chains required");
  const std::size_t len = chains[0].size();
  for (const auto& c : chains) {
    if (c.size() != len) throw InputError("gelman_rubin: chains must have equal length");
  }
  if (len < 10) throw InputError("gelman_rubin: chains must have at least 10 draws");

  std::vector<std::span<const double>> parts;
  for (const auto& c : chains) {
    if (split) {
      const std::size_t h = len / 2;
      parts.emplace_back(c.data(), h);
      parts.emplace_back(c.data() + (len - h), h);
    } else {
      parts.emplace_back(c.data(), len);
    }
  }
  const double m = static_cast<double>(parts.size());
  const double n = static_cast<double>(parts[0].size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& p : parts) {
    means.push_back(mean_of(p));
    w += var_of(p);
  }
  w /= m;
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  if (w == 0.0) return b == 0.0 ? 1.0 : kInf;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level must be in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ScalarSummary summarize_scalar(std::string name, std::span<const double> values) {
  if (values.empty()) throw InputError("summarize: empty trace for '" + name + "'");
  ScalarSummary s;
  s.name = std::move(name);
  s.mean = mean_of(values);
  s.sd = std::sqrt(var_of(values));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.q025 = sorted_quantile(sorted, 0.025);
  s.q975 = sorted_quantile(sorted, 0.975);
  return s;
}

std::vector<ScalarSummary> summarize(std::span<const ChainTrace> chains) {
  if (chains.empty()) throw InputError("summarize: no chains");
  const auto& names = chains[0].names;
  std::vector<ScalarSummary> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<double> pooled;
    for (const auto& c : chains) {
      if (c.names != names) throw InputError("summarize: chains disagree on scalar names");
      for (const auto& d : c.draws) pooled.push_back(d[k]);
    }
    out.push_back(summarize_scalar(names[k], pooled));
  }
  return out;
}

DicResult compute_dic(std::span<const std::vector<double>> draws,
                      const std::function<double(std::span<const double>)>& deviance) {
  if (draws.empty()) throw InputError("dic: no posterior draws");
  const std::size_t k = draws[0].size();
  double dsum = 0.0;
  for (const auto& d : draws) {
    const double dev = deviance(d);
    if (!std::isfinite(dev)) throw NumericalError("dic: posterior draw with non-finite deviance");
    dsum += dev;
  }
  DicResult r;
  r.dbar = dsum / static_cast<double>(draws.size());

  std::vector<double> mean(k, 0.0), median(k);
  for (const auto& d : draws)
    for (std::size_t j = 0; j < k; ++j) mean[j] += d[j];
  for (double& v : mean) v /= static_cast<double>(draws.size());
  double d_plug = deviance(mean);
  if (!std::isfinite(d_plug)) {
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> col;
      for (const auto& d : draws) col.push_back(d[j]);
      median[j] = quantile_of(std::move(col), 0.5);
    }
    d_plug = deviance(median);
    if (!std::isfinite(d_plug))
      throw NumericalError("dic: both posterior mean and median plug-ins lie outside the support");
    r.median_plugin = true;
  }
  r.d_at_plugin = d_plug;
  r.pd = r.dbar - d_plug;
  r.dic = r.dbar + r.pd;
  return r;
}

DicResult dic(std::span<const std::vector<double>> draws, const HierarchicalProblem& problem) {
  const auto& sites = problem.data.sites;
  return compute_dic(draws, [&](std::span<const double> theta) {
    const CoefficientSet c = from_scalars(theta, problem.spec, sites);
    // A plug-in xi outside (-1, 1) is outside the model even if the data allow it.
    for (double xi : c.xi)
      if (!(xi > -1.0 && xi < 1.0)) return kInf;
    return -2.0 * data_loglik(c, problem.data, problem.spec);
  });
}

std::vector<std::vector<double>> PosteriorRun::pooled_draws() const {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) out.insert(out.end(), c.draws.begin(), c.draws.end());
  return out;
}

PosteriorRun fit(const HierarchicalProblem& problem, const McmcConfig& config) {
  config.validate();
  if (problem.data.num_observations() == 0) throw InputError("fit: no conflicts");
  PosteriorRun run;
  run.spec = problem.spec;
  run.sites = problem.data.sites;
  run.config = config;
  run.dataset_fingerprint = problem.data.fingerprint();
  run.cycles_fingerprint = problem.data.cycles_fingerprint();
  run.chains.resize(config.chains);

  std::vector<std::exception_ptr> errors(config.chains);
  {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < config.chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          run.chains[c] = run_chain(problem, config, c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  run.names = run.chains[0].names;
  run.rhat.assign(run.names.size(), std::numeric_limits<double>::quiet_NaN());
  if (config.chains >= 2 && run.chains[0].draws.size() >= 10) {
    for (std::size_t k = 0; k < run.names.size(); ++k) {
      std::vector<std::vector<double>> cols;
      for (const auto& c : run.chains) cols.push_back(c.column(k));
      run.rhat[k] = gelman_rubin(cols, true);
    }
  }
  run.summaries = summarize(run.chains);
  run.dic = dic(run.pooled_draws(), problem);
  return run;
}

std::vector<RankedModel> compare_models(std::span<const ModelComparisonInput> runs) {
  if (runs.size() < 2) throw InputError("compare: at least two runs required");
  for (const auto& r : runs) {
    if (r.dataset_fingerprint != runs[0].dataset_fingerprint)
      throw InputError("compare: run '" + r.label + "' was fitted to a different dataset than '" +
                       runs[0].label + "' (dataset fingerprint mismatch)");
  }
  std::vector<RankedModel> out;
  for (const auto& r : runs) out.push_back({r.label, r.dic, 0.0, ""});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.dic < b.dic; });
  const double best = out[0].dic;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].delta = out[i].dic - best;
    if (i == 0)
      out[i].verdict = "best";
    else if (out[i].delta < 5.0)
      out[i].verdict = "competitive";
    else if (out[i].delta > 10.0)
      out[i].verdict = "decisive";
    else
      out[i].verdict = "inconclusive";
  }
  return out;
}

}  // namespace hpot
