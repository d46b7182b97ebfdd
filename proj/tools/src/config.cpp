#include "hpot/tools/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <sstream>

#include "hpot/errors.hpp"
#include "hpot/tools/generator.hpp"
#include "hpot/tools/io.hpp"

namespace hpot::tools {

namespace pt = boost::property_tree;

namespace {

const char* kGenericSlot[kNumSlots] = {"mu", "phi", "body1", "body2"};

template <class T>
void read_count(const pt::ptree& tree, const std::string& key, T& target) {
  if (auto v = tree.get_optional<std::string>(key)) {
    const long long n = parse_int(*v, key);
    if (n < 0) throw InputError("config: " + key + " must be non-negative");
    target = static_cast<T>(n);
  }
}

void read_real(const pt::ptree& tree, const std::string& key, double& target) {
  if (auto v = tree.get_optional<std::string>(key)) target = parse_double(*v, key);
}

void read_path(const pt::ptree& tree, const std::string& key, std::filesystem::path& target) {
  if (auto v = tree.get_optional<std::string>(key)) target = *v;
}

}  // namespace

LinkSpec default_links() {
  LinkSpec l;
  l.of(Slot::mu) = {Covariate::shockwave_area};
  l.of(Slot::phi) = {Covariate::shockwave_area};
  return l;
}

RunConfig default_run_config() {
  RunConfig c;
  c.spec.links = default_links();
  return c;
}

std::vector<Covariate> parse_covariate_list(const std::string& text) {
  std::vector<Covariate> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const Covariate c = parse_covariate(token);
    if (std::find(out.begin(), out.end(), c) != out.end())
      throw InputError("covariate '" + token + "' listed twice");
    out.push_back(c);
    token.clear();
  };
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '\t')
      flush();
    else
      token += ch;
  }
  flush();
  return out;
}

std::string format_covariate_list(const std::vector<Covariate>& covs) {
  std::string s;
  for (Covariate c : covs) s += (s.empty() ? "" : ",") + std::string(to_string(c));
  return s;
}

void load_config(const std::filesystem::path& path, RunConfig& config) {
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ": " + e.what());
    }
    const GeneratorConfig g = generator_from_json(j);
    config.spec = g.spec;
    return;
  }

  pt::ptree tree;
  try {
    std::istringstream in(read_text(path));
    pt::read_ini(in, tree);
  } catch (const pt::ptree_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  for (const auto& [section, _] : tree) {
    if (section != "model" && section != "links" && section != "mcmc" && section != "data" && section != "output" &&
        section != "risk")
      throw InputError(path.string() + ": unknown section [" + section + "]");
  }

  if (auto model = tree.get_child_optional("model")) {
    if (auto fam = model->get_optional<std::string>("family")) config.spec.family = parse_model_name(*fam);
  }
  if (auto links = tree.get_child_optional("links")) {
    for (const auto& [key, value] : *links) {
      std::size_t slot = kNumSlots;
      for (std::size_t s = 0; s < kNumSlots; ++s)
        if (key == kGenericSlot[s] || key == slot_name(config.spec.family, static_cast<Slot>(s))) slot = s;
      if (slot == kNumSlots) throw InputError(path.string() + ": unknown [links] key '" + key + "'");
      config.spec.links.covariates[slot] = parse_covariate_list(value.get_value<std::string>());
    }
  }
  if (auto m = tree.get_child_optional("mcmc")) {
    read_count(*m, "chains", config.mcmc.chains);
    read_count(*m, "iterations", config.mcmc.iterations);
    read_count(*m, "burn_in", config.mcmc.burn_in);
    read_count(*m, "seed", config.mcmc.seed);
    read_real(*m, "target_acceptance", config.mcmc.target_acceptance);
    read_count(*m, "adaptation_window", config.mcmc.adaptation_window);
    read_count(*m, "thinning", config.mcmc.thinning);
  }
  if (auto d = tree.get_child_optional("data")) {
    read_path(*d, "conflicts", config.conflicts);
    read_path(*d, "cycles", config.cycles);
    read_path(*d, "crashes", config.crashes);
  }
  if (auto o = tree.get_child_optional("output")) read_path(*o, "dir", config.out);
  if (auto r = tree.get_child_optional("risk")) {
    read_real(*r, "t_hours", config.t_hours);
    read_real(*r, "T_hours", config.T_hours);
  }
}

std::string resolved_config_text(const RunConfig& c) {
  std::ostringstream os;
  os << "[model]\nfamily = " << model_name(c.spec.family) << "\n\n[links]\n";
  for (std::size_t s = 0; s < kNumSlots; ++s)
    os << slot_name(c.spec.family, static_cast<Slot>(s)) << " = " << format_covariate_list(c.spec.links.covariates[s])
       << "\n";
  os << "\n[mcmc]\nchains = " << c.mcmc.chains << "\niterations = " << c.mcmc.iterations
     << "\nburn_in = " << c.mcmc.burn_in << "\nseed = " << c.mcmc.seed
     << "\ntarget_acceptance = " << fmt(c.mcmc.target_acceptance)
     << "\nadaptation_window = " << c.mcmc.adaptation_window << "\nthinning = " << c.mcmc.thinning << "\n";
  os << "\n[data]\nconflicts = " << c.conflicts.string() << "\ncycles = " << c.cycles.string()
     << "\ncrashes = " << c.crashes.string() << "\n";
  os << "\n[output]\ndir = " << c.out.string() << "\n";
  os << "\n[risk]\nt_hours = " << fmt(c.t_hours) << "\nT_hours = " << fmt(c.T_hours) << "\n";
  return os.str();
}

}  // namespace hpot::tools
