#pragma once

// Reading and writing a fit's output directory:
//   traces.csv       chain,iteration,<scalar names>
//   summary.csv      name,mean,sd,q025,q975
//   convergence.csv  name,rhat,accept_chain<k>...,scale_chain<k>...
//   dic.json         dbar, pd, dic, likelihood_scope, plug-in, fingerprint
//   run.json         model, links, sites, mcmc settings, fingerprints
//   resolved-config  the RunConfig actually used
//   ingest.csv       per-site counts and PET range

#include <filesystem>
#include <string>

#include "json.hpp"

#include "hpot/inference.hpp"
#include "hpot/tools/config.hpp"
#include "hpot/tools/io.hpp"

namespace hpot::tools {

std::string fingerprint_hex(std::uint64_t v);
std::uint64_t parse_fingerprint(const std::string& hex);

std::string traces_csv(const PosteriorRun& run);
std::string summary_csv(std::span<const ScalarSummary> rows);
std::string convergence_csv(const PosteriorRun& run);
nlohmann::ordered_json dic_json(const PosteriorRun& run);
nlohmann::ordered_json run_json(const PosteriorRun& run, const IngestReport& report);

void write_run(const std::filesystem::path& dir, const PosteriorRun& run, const RunConfig& config,
               const Dataset& data, const IngestReport& report);

// Rebuilds a PosteriorRun from run.json, traces.csv and dic.json; summaries
// and R-hat are recomputed from the traces.
PosteriorRun load_run(const std::filesystem::path& dir);

}  // namespace hpot::tools
