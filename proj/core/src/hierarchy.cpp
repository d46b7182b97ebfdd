#include "hpot/hierarchy.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "hpot/errors.hpp"

namespace hpot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_logpdf(double x, double sd) {
  const double z = x / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

class Fnv1a {
 public:
  void add(std::string_view s) {
    for (unsigned char c : s) {
      hash_ ^= c;
      hash_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    add(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

void hash_cycles(Fnv1a& h, const Dataset& d) {
  for (const auto& c : d.cycles) {
    h.add(c.site_id);
    h.add(",");
    h.add(c.cycle_id);
    h.add(",");
    h.add(c.volume);
    h.add(",");
    h.add(c.shockwave_area);
    h.add(",");
    h.add(c.platoon_ratio);
    h.add("\n");
  }
}

}  // namespace

std::string_view to_string(Covariate c) {
  switch (c) {
    case Covariate::volume: return "V";
    case Covariate::shockwave_area: return "A";
    case Covariate::platoon_ratio: return "P";
  }
  return "?";
}

Covariate parse_covariate(std::string_view name) {
  if (name == "V") return Covariate::volume;
  if (name == "A") return Covariate::shockwave_area;
  if (name == "P") return Covariate::platoon_ratio;
  throw InputError("unknown covariate '" + std::string(name) + "' (expected V, A or P)");
}

double CycleRecord::covariate(Covariate c) const {
  switch (c) {
    case Covariate::volume: return volume;
    case Covariate::shockwave_area: return shockwave_area;
    case Covariate::platoon_ratio: return platoon_ratio;
  }
  return 0.0;
}

std::string model_name(BodyFamily family) { return std::string(to_string(family)) + "-gpd"; }

BodyFamily parse_model_name(std::string_view name) {
  for (BodyFamily f : kAllBodyFamilies)
    if (name == model_name(f) || name == to_string(f)) return f;
  throw InputError("unknown model '" + std::string(name) +
                   "' (expected normal-gpd, cauchy-gpd, logistic-gpd, gamma-gpd or lognormal-gpd)");
}

std::string slot_name(BodyFamily family, Slot slot) {
  if (slot == Slot::mu) return "mu";
  if (slot == Slot::phi) return "phi";
  const bool first = slot == Slot::body1;
  switch (family) {
    case BodyFamily::normal: return first ? "kappa" : "log_lambda";
    case BodyFamily::cauchy: return first ? "x0" : "log_gamma";
    case BodyFamily::logistic: return first ? "theta" : "log_g";
    case BodyFamily::mirrored_gamma: return first ? "log_p" : "log_q";
    case BodyFamily::mirrored_lognormal: return first ? "nu" : "log_w";
  }
  return "?";
}

bool slot_is_log_scale(BodyFamily family, Slot slot) {
  switch (slot) {
    case Slot::mu: return false;
    case Slot::phi: return true;
    case Slot::body1: return is_positive_parameter(family, 0);
    case Slot::body2: return is_positive_parameter(family, 1);
  }
  return false;
}

std::optional<std::size_t> CoefficientSet::site_index(std::string_view site_id) const {
  for (std::size_t i = 0; i < site_ids.size(); ++i)
    if (site_ids[i] == site_id) return i;
  return std::nullopt;
}

CoefficientSet CoefficientSet::zeros(const LinkSpec& spec, std::vector<std::string> site_ids) {
  CoefficientSet c;
  const std::size_t n = site_ids.size();
  c.site_ids = std::move(site_ids);
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    c.linked[s].beta.assign(spec.covariates[s].size(), 0.0);
    c.linked[s].offset.assign(n, 0.0);
    c.linked[s].delta = 1.0;
  }
  c.xi.assign(n, 0.0);
  return c;
}

void check_shape(const CoefficientSet& coeffs, const LinkSpec& spec) {
  const std::size_t n = coeffs.site_ids.size();
  if (coeffs.xi.size() != n) throw InputError("coefficient set: one xi per site required");
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    if (coeffs.linked[s].beta.size() != spec.covariates[s].size())
      throw InputError("coefficient set: covariate coefficients do not match the link spec");
    if (coeffs.linked[s].offset.size() != n)
      throw InputError("coefficient set: one random intercept per site required");
  }
}

std::array<double, kNumSlots> linear_predictors(const CoefficientSet& coeffs, const CycleRecord& cycle,
                                                std::size_t site, const LinkSpec& spec) {
  std::array<double, kNumSlots> eta{};
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    const auto& lc = coeffs.linked[s];
    double v = lc.global + lc.offset[site];
    const auto& covs = spec.covariates[s];
    for (std::size_t k = 0; k < covs.size(); ++k) v += lc.beta[k] * cycle.covariate(covs[k]);
    eta[s] = v;
  }
  return eta;
}

HybridParams link_eval(const CoefficientSet& coeffs, const CycleRecord& cycle, std::size_t site,
                       const ModelSpec& spec) {
  if (site >= coeffs.site_ids.size()) throw InputError("link_eval: site index out of range");
  const auto eta = linear_predictors(coeffs, cycle, site, spec.links);
  auto transform = [&](Slot s) {
    const double v = eta[static_cast<std::size_t>(s)];
    return slot_is_log_scale(spec.family, s) ? std::exp(v) : v;
  };
  HybridParams p;
  p.body = BodyParams{spec.family, transform(Slot::body1), transform(Slot::body2)};
  p.tail = GpdParams{eta[0], std::exp(eta[1]), coeffs.xi[site]};
  return p;
}

HybridParams link_eval(const CoefficientSet& coeffs, const CycleRecord& cycle, const ModelSpec& spec) {
  const auto site = coeffs.site_index(cycle.site_id);
  if (!site) throw InputError("link_eval: unknown site '" + cycle.site_id + "'");
  return link_eval(coeffs, cycle, *site, spec);
}

double log_prior(const CoefficientSet& coeffs) {
  const double coef_sd = std::sqrt(kCoefficientPriorVariance);
  double lp = 0.0;
  for (const auto& lc : coeffs.linked) {
    if (!(lc.delta > 0.0) || !std::isfinite(lc.delta)) return -kInf;
    lp += normal_logpdf(lc.global, coef_sd);
    for (double b : lc.beta) lp += normal_logpdf(b, coef_sd);
    for (double e : lc.offset) lp += normal_logpdf(e, lc.delta);
    lp += std::numbers::ln2 + normal_logpdf(lc.delta, kHyperScalePriorSd);
  }
  for (double x : coeffs.xi) {
    if (!(x > -1.0 && x < 1.0)) return -kInf;
    lp += -std::numbers::ln2;
  }
  return lp;
}

// ---------------------------------------------------------------------------

Dataset Dataset::build(std::vector<CycleRecord> cycles, std::span<const ConflictObservation> conflicts) {
  Dataset d;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const auto& c = cycles[i];
    auto [it, inserted] = index.emplace(std::make_pair(c.site_id, c.cycle_id), i);
    if (!inserted)
      throw InputError("duplicate cycle key (site_id=" + c.site_id + ", cycle_id=" + c.cycle_id + ")");
    std::size_t site = d.sites.size();
    for (std::size_t s = 0; s < d.sites.size(); ++s)
      if (d.sites[s] == c.site_id) site = s;
    if (site == d.sites.size()) {
      d.sites.push_back(c.site_id);
      d.site_cycles.emplace_back();
    }
    d.cycle_site.push_back(site);
    d.site_cycles[site].push_back(i);
  }
  d.cycles = std::move(cycles);
  d.values.assign(d.cycles.size(), {});
  for (const auto& obs : conflicts) {
    const auto it = index.find({obs.site_id, obs.cycle_id});
    if (it == index.end())
      throw InputError("conflict references missing cycle (site_id=" + obs.site_id +
                       ", cycle_id=" + obs.cycle_id + ")");
    d.values[it->second].push_back(obs.negated());
  }
  return d;
}

std::size_t Dataset::num_observations() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

std::vector<double> Dataset::site_values(std::size_t site) const {
  std::vector<double> out;
  for (std::size_t c : site_cycles.at(site)) out.insert(out.end(), values[c].begin(), values[c].end());
  return out;
}

std::uint64_t Dataset::fingerprint() const {
  Fnv1a h;
  hash_cycles(h, *this);
  h.add("--\n");
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (double v : values[i]) {
      h.add(cycles[i].site_id);
      h.add(",");
      h.add(cycles[i].cycle_id);
      h.add(",");
      h.add(v);
      h.add("\n");
    }
  }
  return h.value();
}

std::uint64_t Dataset::cycles_fingerprint() const {
  Fnv1a h;
  hash_cycles(h, *this);
  return h.value();
}

double site_loglik(const CoefficientSet& coeffs, const Dataset& data, const ModelSpec& spec, std::size_t site) {
  double total = 0.0;
  for (std::size_t c : data.site_cycles[site]) {
    const auto& vals = data.values[c];
    if (vals.empty()) continue;
    const HybridParams p = link_eval(coeffs, data.cycles[c], site, spec);
    // Negated PET: the crash boundary sits at 0, so a usable threshold is negative.
    if (!(p.tail.mu < 0.0)) return -kInf;
    const HybridDensity density(p);
    const double ll = density.loglik(vals);
    if (ll == -kInf) return -kInf;
    total += ll;
  }
  return total;
}

double data_loglik(const CoefficientSet& coeffs, const Dataset& data, const ModelSpec& spec) {
  double total = 0.0;
  for (std::size_t s = 0; s < data.sites.size(); ++s) {
    const double ll = site_loglik(coeffs, data, spec, s);
    if (ll == -kInf) return -kInf;
    total += ll;
  }
  return total;
}

double log_posterior(const CoefficientSet& coeffs, const Dataset& data, const ModelSpec& spec) {
  check_shape(coeffs, spec.links);
  if (coeffs.site_ids != data.sites) throw InputError("log_posterior: coefficient sites do not match the data");
  const double lp = log_prior(coeffs);
  if (lp == -kInf) return -kInf;
  const double ll = data_loglik(coeffs, data, spec);
  if (ll == -kInf) return -kInf;
  return lp + ll;
}

double log_posterior(const CoefficientSet& coeffs, std::span<const ConflictObservation> conflicts,
                     std::span<const CycleRecord> cycles, const ModelSpec& spec) {
  const Dataset d = Dataset::build(std::vector<CycleRecord>(cycles.begin(), cycles.end()), conflicts);
  return log_posterior(coeffs, d, spec);
}

// ---------------------------------------------------------------------------

std::vector<std::string> scalar_names(const ModelSpec& spec, std::span<const std::string> sites) {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    const std::string p = slot_name(spec.family, static_cast<Slot>(s));
    names.push_back(p + ".global");
    for (const auto& site : sites) names.push_back(p + ".intercept[" + site + "]");
    for (Covariate c : spec.links.covariates[s]) names.push_back(p + ".beta[" + std::string(to_string(c)) + "]");
    names.push_back(p + ".delta");
  }
  for (const auto& site : sites) names.push_back("xi[" + site + "]");
  return names;
}

std::vector<double> to_scalars(const CoefficientSet& coeffs, const ModelSpec& spec) {
  check_shape(coeffs, spec.links);
  std::vector<double> v;
  for (const auto& lc : coeffs.linked) {
    v.push_back(lc.global);
    for (std::size_t i = 0; i < lc.offset.size(); ++i) v.push_back(lc.site_intercept(i));
    v.insert(v.end(), lc.beta.begin(), lc.beta.end());
    v.push_back(lc.delta);
  }
  v.insert(v.end(), coeffs.xi.begin(), coeffs.xi.end());
  return v;
}

CoefficientSet from_scalars(std::span<const double> values, const ModelSpec& spec, std::vector<std::string> sites) {
  CoefficientSet c = CoefficientSet::zeros(spec.links, std::move(sites));
  const std::size_t n = c.site_ids.size();
  std::size_t expected = n;
  for (const auto& covs : spec.links.covariates) expected += 2 + n + covs.size();
  if (values.size() != expected) {
    std::ostringstream os;
    os << "from_scalars: expected " << expected << " values, got " << values.size();
    throw InputError(os.str());
  }
  std::size_t k = 0;
  for (auto& lc : c.linked) {
    lc.global = values[k++];
    for (std::size_t i = 0; i < n; ++i) lc.offset[i] = values[k++] - lc.global;
    for (auto& b : lc.beta) b = values[k++];
    lc.delta = values[k++];
  }
  for (auto& x : c.xi) x = values[k++];
  return c;
}

}  // namespace hpot
