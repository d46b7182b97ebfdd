#pragma once

// Run configuration: an INI file with [model], [links], [mcmc], [data],
// [output] and [risk] sections. Every run writes the resolved values back
// out in the same format.

#include <filesystem>
#include <string>

#include "hpot/hierarchy.hpp"
#include "hpot/inference.hpp"

namespace hpot::tools {

struct RunConfig {
  ModelSpec spec;
  McmcConfig mcmc;
  std::filesystem::path conflicts;
  std::filesystem::path cycles;
  std::filesystem::path crashes;
  std::filesystem::path out;
  double t_hours = 4.0;
  double T_hours = 8760.0;
};

// mu and phi on shock wave area; everything else intercept-only.
LinkSpec default_links();
RunConfig default_run_config();

// "A,V" or "A V" or "" (intercept only).
std::vector<Covariate> parse_covariate_list(const std::string& text);
std::string format_covariate_list(const std::vector<Covariate>& covs);

// Overlays the settings found in `path` onto `config`. A .json file is read
// as a generator/truth document and contributes only model and links.
void load_config(const std::filesystem::path& path, RunConfig& config);
std::string resolved_config_text(const RunConfig& config);

}  // namespace hpot::tools
