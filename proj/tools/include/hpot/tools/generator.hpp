#pragma once

// Synthetic multi-site data drawn from a known hierarchical hybrid model.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "hpot/hierarchy.hpp"
#include "hpot/tools/io.hpp"

namespace hpot::tools {

struct CovariateRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct GeneratorConfig {
  ModelSpec spec;
  CoefficientSet truth;
  std::size_t cycles_per_site = 100;
  double conflicts_per_cycle = 10.0;
  // Uniform ranges for V, A, P.
  std::array<CovariateRange, 3> ranges{{{2.0, 28.0}, {0.0, 4.5}, {0.0, 1.9}}};
  double t_hours = 4.0;     // observation time behind each site's cycles
  double T_hours = 8760.0;  // projection horizon for the true crash count
  int years = 3;            // years of crash counts to draw

  // Throws InputError for malformed coefficients or any cycle whose
  // threshold would be >= 0; checked again per drawn cycle.
  void validate() const;
};

// Three sites, lognormal body, mu and phi linked to shock wave area. The
// tail scale is small enough that the density jumps at the threshold, which
// is what lets a fit locate it.
GeneratorConfig default_generator();

struct SimulatedData {
  std::vector<CycleRecord> cycles;
  std::vector<ConflictObservation> conflicts;
  std::vector<CrashRecord> crashes;
  std::vector<double> true_annual_crashes;  // per site, from the generating tails
  std::size_t dropped_draws = 0;            // draws with PET <= 0 or > 4
};

SimulatedData simulate(const GeneratorConfig& config, std::uint64_t seed);

// truth.json: model, links, sites, coefficients by scalar name, generator
// settings. Results (true crash counts, dropped draws) are added by
// truth_json when `data` is given and ignored by generator_from_json.
nlohmann::ordered_json truth_json(const GeneratorConfig& config, std::uint64_t seed, const SimulatedData* data);
GeneratorConfig generator_from_json(const nlohmann::json& j);

nlohmann::ordered_json links_to_json(const ModelSpec& spec);
// Accepts slot keys by family name ("nu", "log_w") or generically
// ("mu", "phi", "body1", "body2").
LinkSpec links_from_json(const nlohmann::json& j, BodyFamily family);

}  // namespace hpot::tools
