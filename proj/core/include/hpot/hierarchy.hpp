#pragma once

// Process and prior layers of the hierarchical hybrid model: covariate link
// functions with site random intercepts, and the log-prior / log-posterior.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpot/distmath.hpp"
#include "hpot/hybrid.hpp"

namespace hpot {

enum class Covariate { volume, shockwave_area, platoon_ratio };

inline constexpr std::array<Covariate, 3> kAllCovariates{Covariate::volume, Covariate::shockwave_area,
                                                         Covariate::platoon_ratio};

// "V", "A", "P".
std::string_view to_string(Covariate c);
Covariate parse_covariate(std::string_view name);

// Linked parameters, in the order they are stored everywhere.
enum class Slot : std::size_t { mu = 0, phi = 1, body1 = 2, body2 = 3 };
inline constexpr std::size_t kNumSlots = 4;

struct CycleRecord {
  std::string site_id;
  std::string cycle_id;
  double volume = 0.0;          // vehicles per lane per cycle
  double shockwave_area = 0.0;  // km*s
  double platoon_ratio = 0.0;

  double covariate(Covariate c) const;
};

struct ConflictObservation {
  std::string site_id;
  std::string cycle_id;
  double pet = 0.0;  // seconds, in (0, 4]
  double negated() const { return -pet; }
};

// Which covariates enter each linear predictor. The GPD shape never takes
// covariates, so it has no entry here.
struct LinkSpec {
  std::array<std::vector<Covariate>, kNumSlots> covariates;

  const std::vector<Covariate>& of(Slot s) const { return covariates[static_cast<std::size_t>(s)]; }
  std::vector<Covariate>& of(Slot s) { return covariates[static_cast<std::size_t>(s)]; }
};

struct ModelSpec {
  BodyFamily family = BodyFamily::mirrored_lognormal;
  LinkSpec links;
};

// "normal-gpd", "cauchy-gpd", "logistic-gpd", "gamma-gpd", "lognormal-gpd".
std::string model_name(BodyFamily family);
BodyFamily parse_model_name(std::string_view name);

// Name of the linear predictor in a slot, e.g. "mu", "phi", "nu", "log_w".
std::string slot_name(BodyFamily family, Slot slot);
// Whether the slot's predictor is the log of a positive parameter.
bool slot_is_log_scale(BodyFamily family, Slot slot);

struct LinkedCoefficients {
  double global = 0.0;          // b
  std::vector<double> beta;     // aligned with LinkSpec::of(slot)
  std::vector<double> offset;   // per-site epsilon_i
  double delta = 1.0;           // hyper-scale of the offsets

  double site_intercept(std::size_t site) const { return global + offset[site]; }
};

struct CoefficientSet {
  std::vector<std::string> site_ids;
  std::array<LinkedCoefficients, kNumSlots> linked;
  std::vector<double> xi;  // per site

  LinkedCoefficients& of(Slot s) { return linked[static_cast<std::size_t>(s)]; }
  const LinkedCoefficients& of(Slot s) const { return linked[static_cast<std::size_t>(s)]; }

  std::optional<std::size_t> site_index(std::string_view site_id) const;

  // All-zero coefficients with unit hyper-scales.
  static CoefficientSet zeros(const LinkSpec& spec, std::vector<std::string> site_ids);
};

// Throws InputError if vector sizes disagree with the model links or site count.
void check_shape(const CoefficientSet& coeffs, const LinkSpec& spec);

// Linear predictors for one cycle at a given site index, before transforms.
std::array<double, kNumSlots> linear_predictors(const CoefficientSet& coeffs, const CycleRecord& cycle,
                                                std::size_t site, const LinkSpec& spec);

HybridParams link_eval(const CoefficientSet& coeffs, const CycleRecord& cycle, std::size_t site,
                       const ModelSpec& spec);
// Looks the site up by id; unknown sites are an InputError.
HybridParams link_eval(const CoefficientSet& coeffs, const CycleRecord& cycle, const ModelSpec& spec);

// Prior densities used by log_prior.
inline constexpr double kCoefficientPriorVariance = 1e6;
inline constexpr double kHyperScalePriorSd = 2.5;

double log_prior(const CoefficientSet& coeffs);

// Conflicts grouped by cycle, with cycle -> site index resolved.
struct Dataset {
  std::vector<std::string> sites;          // order of first appearance in the cycle table
  std::vector<CycleRecord> cycles;
  std::vector<std::size_t> cycle_site;     // index into sites
  std::vector<std::vector<double>> values; // negated PET per cycle
  std::vector<std::vector<std::size_t>> site_cycles;

  // Validates unique (site, cycle) keys and that every observation refers to
  // an existing cycle; both are InputErrors naming the offending key.
  static Dataset build(std::vector<CycleRecord> cycles, std::span<const ConflictObservation> conflicts);

  std::size_t num_observations() const;
  std::vector<double> site_values(std::size_t site) const;
  // FNV-1a over a canonical rendering of cycles and observations.
  std::uint64_t fingerprint() const;
  std::uint64_t cycles_fingerprint() const;
};

// Data-layer log-likelihood restricted to one site's cycles.
double site_loglik(const CoefficientSet& coeffs, const Dataset& data, const ModelSpec& spec, std::size_t site);
// Sum of site_loglik over all sites (the deviance's log-likelihood).
double data_loglik(const CoefficientSet& coeffs, const Dataset& data, const ModelSpec& spec);

// log_prior + data_loglik; -inf when either is.
double log_posterior(const CoefficientSet& coeffs, const Dataset& data, const ModelSpec& spec);
// Same, building the grouped dataset first (dangling cycle references throw).
double log_posterior(const CoefficientSet& coeffs, std::span<const ConflictObservation> conflicts,
                     std::span<const CycleRecord> cycles, const ModelSpec& spec);

// Flat scalar view used for traces: per slot "<p>.global", "<p>.intercept[site]",
// "<p>.beta[cov]", "<p>.delta", then "xi[site]". Intercepts are b + epsilon_i.
std::vector<std::string> scalar_names(const ModelSpec& spec, std::span<const std::string> sites);
std::vector<double> to_scalars(const CoefficientSet& coeffs, const ModelSpec& spec);
CoefficientSet from_scalars(std::span<const double> values, const ModelSpec& spec,
                            std::vector<std::string> sites);

}  // namespace hpot
