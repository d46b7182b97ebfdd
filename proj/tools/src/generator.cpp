#include "hpot/tools/generator.hpp"

#include <cmath>

#include "hpot/errors.hpp"
#include "hpot/hybrid.hpp"
#include "hpot/risk.hpp"
#include "hpot/rng.hpp"

namespace hpot::tools {

namespace {

void set_site_intercepts(LinkedCoefficients& lc, std::initializer_list<double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  lc.global = sum / static_cast<double>(values.size());
  lc.offset.clear();
  double ss = 0.0;
  for (double v : values) {
    lc.offset.push_back(v - lc.global);
    ss += (v - lc.global) * (v - lc.global);
  }
  lc.delta = std::max(std::sqrt(ss / static_cast<double>(values.size() - 1)), 0.01);
}

void check_cycle(const HybridParams& p, const CycleRecord& c) {
  if (!(p.tail.mu < 0.0))
    throw InputError("generator: threshold is not negative for cycle (site_id=" + c.site_id +
                     ", cycle_id=" + c.cycle_id + ")");
  if (!is_valid(p))
    throw InputError("generator: invalid hybrid parameters for cycle (site_id=" + c.site_id +
                     ", cycle_id=" + c.cycle_id + ")");
}

}  // namespace

void GeneratorConfig::validate() const {
  check_shape(truth, spec.links);
  if (truth.site_ids.empty()) throw InputError("generator: no sites");
  if (cycles_per_site == 0) throw InputError("generator: cycles_per_site must be positive");
  if (!(conflicts_per_cycle > 0.0)) throw InputError("generator: conflicts_per_cycle must be positive");
  if (!(t_hours > 0.0) || !(T_hours > 0.0)) throw InputError("generator: t_hours and T_hours must be positive");
  if (years < 1) throw InputError("generator: years must be at least 1");
  for (const auto& r : ranges)
    if (!(r.hi >= r.lo)) throw InputError("generator: covariate range with hi < lo");
  for (double xi : truth.xi)
    if (!(xi > -1.0 && xi < 1.0)) throw InputError("generator: xi must lie in (-1, 1)");

  // The threshold is affine in the covariates, so its extremes over the box
  // sit at the corners.
  for (std::size_t s = 0; s < truth.site_ids.size(); ++s) {
    for (int corner = 0; corner < 8; ++corner) {
      CycleRecord c;
      c.site_id = truth.site_ids[s];
      c.cycle_id = "corner";
      c.volume = (corner & 1) ? ranges[0].hi : ranges[0].lo;
      c.shockwave_area = (corner & 2) ? ranges[1].hi : ranges[1].lo;
      c.platoon_ratio = (corner & 4) ? ranges[2].hi : ranges[2].lo;
      const HybridParams p = link_eval(truth, c, s, spec);
      if (!(p.tail.mu < 0.0))
        throw InputError("generator: covariate ranges allow a threshold >= 0 at site '" + c.site_id + "'");
    }
  }
}

GeneratorConfig default_generator() {
  GeneratorConfig g;
  g.spec.family = BodyFamily::mirrored_lognormal;
  g.spec.links.of(Slot::mu) = {Covariate::shockwave_area};
  g.spec.links.of(Slot::phi) = {Covariate::shockwave_area};
  g.truth = CoefficientSet::zeros(g.spec.links, {"1", "2", "3"});
  auto& mu = g.truth.of(Slot::mu);
  set_site_intercepts(mu, {-1.28, -1.22, -1.32});
  mu.beta = {0.036};
  auto& phi = g.truth.of(Slot::phi);
  set_site_intercepts(phi, {-1.60, -1.65, -1.58});
  phi.beta = {0.01};
  set_site_intercepts(g.truth.of(Slot::body1), {0.30, 0.35, 0.25});
  set_site_intercepts(g.truth.of(Slot::body2), {-1.2, -1.1, -1.3});
  g.truth.xi = {-0.10, -0.12, -0.08};
  return g;
}

SimulatedData simulate(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed, 0);
  SimulatedData out;
  const std::size_t n_sites = config.truth.site_ids.size();
  std::vector<std::vector<double>> site_risks(n_sites);

  for (std::size_t s = 0; s < n_sites; ++s) {
    const std::string& site = config.truth.site_ids[s];
    for (std::size_t k = 0; k < config.cycles_per_site; ++k) {
      CycleRecord c;
      c.site_id = site;
      c.cycle_id = std::to_string(k + 1);
      c.volume = rng.uniform(config.ranges[0].lo, config.ranges[0].hi);
      c.shockwave_area = rng.uniform(config.ranges[1].lo, config.ranges[1].hi);
      c.platoon_ratio = rng.uniform(config.ranges[2].lo, config.ranges[2].hi);
      const HybridParams p = link_eval(config.truth, c, s, config.spec);
      check_cycle(p, c);
      site_risks[s].push_back(cycle_crash_risk(p.tail));

      const HybridDensity density(p);
      const std::uint64_t n = rng.poisson(config.conflicts_per_cycle);
      for (std::uint64_t i = 0; i < n; ++i) {
        const double x = density.draw(rng);
        const double pet = -x;
        if (!(pet > 0.0) || pet > kMaxPet) {
          ++out.dropped_draws;
          continue;
        }
        out.conflicts.push_back({site, c.cycle_id, pet});
      }
      out.cycles.push_back(std::move(c));
    }
  }

  for (std::size_t s = 0; s < n_sites; ++s) {
    const double annual = annualize(site_risks[s], config.t_hours, config.T_hours);
    out.true_annual_crashes.push_back(annual);
    // Counts per calendar year, so the horizon is fixed at one year here.
    for (int y = 1; y <= config.years; ++y)
      out.crashes.push_back({config.truth.site_ids[s], y, static_cast<long long>(rng.poisson(annual))});
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json links_to_json(const ModelSpec& spec) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (Covariate c : spec.links.covariates[s]) arr.push_back(std::string(to_string(c)));
    j[slot_name(spec.family, static_cast<Slot>(s))] = arr;
  }
  return j;
}

LinkSpec links_from_json(const nlohmann::json& j, BodyFamily family) {
  if (!j.is_object()) throw InputError("links: expected an object of slot -> covariate list");
  static const char* generic[kNumSlots] = {"mu", "phi", "body1", "body2"};
  LinkSpec spec;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::size_t slot = kNumSlots;
    for (std::size_t s = 0; s < kNumSlots; ++s)
      if (it.key() == generic[s] || it.key() == slot_name(family, static_cast<Slot>(s))) slot = s;
    if (slot == kNumSlots) throw InputError("links: unknown parameter '" + it.key() + "'");
    if (!it.value().is_array()) throw InputError("links: '" + it.key() + "' must be a list");
    auto& covs = spec.covariates[slot];
    covs.clear();
    for (const auto& name : it.value()) {
      const Covariate c = parse_covariate(name.get<std::string>());
      if (std::find(covs.begin(), covs.end(), c) != covs.end())
        throw InputError("links: covariate listed twice for '" + it.key() + "'");
      covs.push_back(c);
    }
  }
  return spec;
}

nlohmann::ordered_json truth_json(const GeneratorConfig& config, std::uint64_t seed, const SimulatedData* data) {
  nlohmann::ordered_json j;
  j["model"] = model_name(config.spec.family);
  j["links"] = links_to_json(config.spec);
  j["sites"] = config.truth.site_ids;
  nlohmann::ordered_json coeffs = nlohmann::ordered_json::object();
  const auto names = scalar_names(config.spec, config.truth.site_ids);
  const auto values = to_scalars(config.truth, config.spec);
  for (std::size_t k = 0; k < names.size(); ++k) coeffs[names[k]] = values[k];
  j["coefficients"] = coeffs;
  nlohmann::ordered_json gen;
  gen["seed"] = seed;
  gen["cycles_per_site"] = config.cycles_per_site;
  gen["conflicts_per_cycle"] = config.conflicts_per_cycle;
  nlohmann::ordered_json ranges;
  for (std::size_t c = 0; c < 3; ++c)
    ranges[std::string(to_string(kAllCovariates[c]))] = {config.ranges[c].lo, config.ranges[c].hi};
  gen["covariate_ranges"] = ranges;
  gen["t_hours"] = config.t_hours;
  gen["T_hours"] = config.T_hours;
  gen["years"] = config.years;
  j["generator"] = gen;
  if (data) {
    nlohmann::ordered_json crashes = nlohmann::ordered_json::object();
    for (std::size_t s = 0; s < config.truth.site_ids.size(); ++s)
      crashes[config.truth.site_ids[s]] = data->true_annual_crashes[s];
    j["true_annual_crashes"] = crashes;
    j["dropped_draws"] = data->dropped_draws;
    j["n_conflicts"] = data->conflicts.size();
  }
  return j;
}

GeneratorConfig generator_from_json(const nlohmann::json& j) {
  try {
    GeneratorConfig g;
    g.spec.family = parse_model_name(j.at("model").get<std::string>());
    g.spec.links = j.contains("links") ? links_from_json(j.at("links"), g.spec.family) : LinkSpec{};
    auto sites = j.at("sites").get<std::vector<std::string>>();
    if (sites.empty()) throw InputError("generator: no sites");
    const auto names = scalar_names(g.spec, sites);
    const auto& coeffs = j.at("coefficients");
    std::vector<double> values;
    for (const auto& name : names) {
      if (!coeffs.contains(name)) throw InputError("generator: missing coefficient '" + name + "'");
      values.push_back(coeffs.at(name).get<double>());
    }
    g.truth = from_scalars(values, g.spec, std::move(sites));
    if (j.contains("generator")) {
      const auto& gen = j.at("generator");
      g.cycles_per_site = gen.value("cycles_per_site", g.cycles_per_site);
      g.conflicts_per_cycle = gen.value("conflicts_per_cycle", g.conflicts_per_cycle);
      g.t_hours = gen.value("t_hours", g.t_hours);
      g.T_hours = gen.value("T_hours", g.T_hours);
      g.years = gen.value("years", g.years);
      if (gen.contains("covariate_ranges")) {
        for (std::size_t c = 0; c < 3; ++c) {
          const std::string key(to_string(kAllCovariates[c]));
          if (!gen.at("covariate_ranges").contains(key)) continue;
          const auto r = gen.at("covariate_ranges").at(key).get<std::vector<double>>();
          if (r.size() != 2) throw InputError("generator: range for " + key + " must be [lo, hi]");
          g.ranges[c] = {r[0], r[1]};
        }
      }
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("generator config: ") + e.what());
  }
}

}  // namespace hpot::tools
