#include "hpot/tools/rundir.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "hpot/errors.hpp"
#include "hpot/tools/generator.hpp"

namespace hpot::tools {

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string fingerprint_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_fingerprint(const std::string& hex) {
  if (hex.size() != 16) throw InputError("malformed dataset fingerprint '" + hex + "'");
  std::uint64_t v = 0;
  for (char c : hex) {
    v <<= 4;
    if (c >= '0' && c <= '9')
      v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f')
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else
      throw InputError("malformed dataset fingerprint '" + hex + "'");
  }
  return v;
}

std::string traces_csv(const PosteriorRun& run) {
  std::ostringstream os;
  os << "chain,iteration";
  for (const auto& n : run.names) os << ',' << n;
  os << '\n';
  for (std::size_t c = 0; c < run.chains.size(); ++c) {
    const auto& ch = run.chains[c];
    for (std::size_t i = 0; i < ch.draws.size(); ++i) {
      os << c + 1 << ',' << ch.iterations[i] + 1;
      for (double v : ch.draws[i]) os << ',' << fmt(v);
      os << '\n';
    }
  }
  return os.str();
}

std::string summary_csv(std::span<const ScalarSummary> rows) {
  std::ostringstream os;
  os << "name,mean,sd,q025,q975\n";
  for (const auto& r : rows)
    os << r.name << ',' << fmt(r.mean) << ',' << fmt(r.sd) << ',' << fmt(r.q025) << ',' << fmt(r.q975) << '\n';
  return os.str();
}

std::string convergence_csv(const PosteriorRun& run) {
  std::ostringstream os;
  os << "name,rhat";
  for (std::size_t c = 0; c < run.chains.size(); ++c) os << ",accept_chain" << c + 1;
  for (std::size_t c = 0; c < run.chains.size(); ++c) os << ",scale_chain" << c + 1;
  os << '\n';
  for (std::size_t k = 0; k < run.names.size(); ++k) {
    os << run.names[k] << ',' << fmt(run.rhat[k]);
    for (const auto& ch : run.chains) os << ',' << (k < ch.acceptance.size() ? fmt(ch.acceptance[k]) : "nan");
    for (const auto& ch : run.chains) os << ',' << (k < ch.scales_final.size() ? fmt(ch.scales_final[k]) : "nan");
    os << '\n';
  }
  return os.str();
}

nlohmann::ordered_json dic_json(const PosteriorRun& run) {
  nlohmann::ordered_json j;
  j["dbar"] = run.dic.dbar;
  j["pd"] = run.dic.pd;
  j["dic"] = run.dic.dic;
  j["likelihood_scope"] = "data-layer";
  j["plugin"] = run.dic.median_plugin ? "posterior-median" : "posterior-mean";
  j["model"] = model_name(run.spec.family);
  j["dataset_fingerprint"] = fingerprint_hex(run.dataset_fingerprint);
  return j;
}

nlohmann::ordered_json run_json(const PosteriorRun& run, const IngestReport& report) {
  nlohmann::ordered_json j;
  j["model"] = model_name(run.spec.family);
  j["links"] = links_to_json(run.spec);
  j["sites"] = run.sites;
  nlohmann::ordered_json m;
  m["chains"] = run.config.chains;
  m["iterations"] = run.config.iterations;
  m["burn_in"] = run.config.burn_in;
  m["seed"] = run.config.seed;
  m["target_acceptance"] = run.config.target_acceptance;
  m["adaptation_window"] = run.config.adaptation_window;
  m["thinning"] = run.config.thinning;
  j["mcmc"] = m;
  j["dataset_fingerprint"] = fingerprint_hex(run.dataset_fingerprint);
  j["cycles_fingerprint"] = fingerprint_hex(run.cycles_fingerprint);
  nlohmann::ordered_json ing;
  ing["rows"] = report.rows;
  ing["accepted"] = report.accepted;
  ing["rejected_nonpositive"] = report.rejected_nonpositive;
  ing["rejected_above_max"] = report.rejected_above_max;
  j["ingest"] = ing;
  double max_rhat = 0.0;
  for (double r : run.rhat)
    if (std::isfinite(r)) max_rhat = std::max(max_rhat, r);
  j["max_rhat"] = max_rhat;
  return j;
}

void write_run(const std::filesystem::path& dir, const PosteriorRun& run, const RunConfig& config,
               const Dataset& data, const IngestReport& report) {
  std::filesystem::create_directories(dir);
  write_text(dir / "traces.csv", traces_csv(run));
  write_text(dir / "summary.csv", summary_csv(run.summaries));
  write_text(dir / "convergence.csv", convergence_csv(run));
  write_text(dir / "dic.json", dic_json(run).dump(2) + "\n");
  write_text(dir / "run.json", run_json(run, report).dump(2) + "\n");
  write_text(dir / "resolved-config", resolved_config_text(config));
  std::ostringstream ing;
  write_site_summary(ing, summarize_sites(data));
  write_text(dir / "ingest.csv", ing.str());
}

PosteriorRun load_run(const std::filesystem::path& dir) {
  const auto meta = parse_json_file(dir / "run.json");
  PosteriorRun run;
  try {
    run.spec.family = parse_model_name(meta.at("model").get<std::string>());
    run.spec.links = links_from_json(meta.at("links"), run.spec.family);
    run.sites = meta.at("sites").get<std::vector<std::string>>();
    const auto& m = meta.at("mcmc");
    run.config.chains = m.at("chains").get<std::size_t>();
    run.config.iterations = m.at("iterations").get<std::size_t>();
    run.config.burn_in = m.at("burn_in").get<std::size_t>();
    run.config.seed = m.at("seed").get<std::uint64_t>();
    run.config.target_acceptance = m.at("target_acceptance").get<double>();
    run.config.adaptation_window = m.at("adaptation_window").get<std::size_t>();
    run.config.thinning = m.at("thinning").get<std::size_t>();
    run.dataset_fingerprint = parse_fingerprint(meta.at("dataset_fingerprint").get<std::string>());
    run.cycles_fingerprint = parse_fingerprint(meta.at("cycles_fingerprint").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError((dir / "run.json").string() + ": " + e.what());
  }
  run.names = scalar_names(run.spec, run.sites);

  const std::string source = (dir / "traces.csv").string();
  std::istringstream in(read_text(dir / "traces.csv"));
  std::string line;
  if (!std::getline(in, line)) throw InputError(source + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() != run.names.size() + 2 || header[0] != "chain" || header[1] != "iteration" ||
      !std::equal(run.names.begin(), run.names.end(), header.begin() + 2))
    throw InputError(source + ": header does not match the model in run.json");
  run.chains.resize(run.config.chains);
  for (auto& c : run.chains) c.names = run.names;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string at = source + ":" + std::to_string(lineno);
    if (f.size() != header.size()) throw InputError(at + ": wrong number of fields");
    const long long chain = parse_int(f[0], at + ": chain");
    if (chain < 1 || static_cast<std::size_t>(chain) > run.chains.size())
      throw InputError(at + ": chain index out of range");
    auto& ch = run.chains[static_cast<std::size_t>(chain - 1)];
    ch.iterations.push_back(static_cast<std::size_t>(parse_int(f[1], at + ": iteration") - 1));
    std::vector<double> row;
    row.reserve(run.names.size());
    for (std::size_t k = 2; k < f.size(); ++k) row.push_back(parse_double(f[k], at));
    ch.draws.push_back(std::move(row));
  }
  for (const auto& c : run.chains)
    if (c.draws.empty()) throw InputError(source + ": a chain has no draws");

  run.rhat.assign(run.names.size(), std::nan(""));
  const bool equal_lengths = std::all_of(run.chains.begin(), run.chains.end(), [&](const ChainTrace& c) {
    return c.draws.size() == run.chains[0].draws.size();
  });
  if (run.chains.size() >= 2 && equal_lengths && run.chains[0].draws.size() >= 10) {
    for (std::size_t k = 0; k < run.names.size(); ++k) {
      std::vector<std::vector<double>> cols;
      for (const auto& c : run.chains) cols.push_back(c.column(k));
      run.rhat[k] = gelman_rubin(cols, true);
    }
  }
  run.summaries = summarize(run.chains);

  const auto d = parse_json_file(dir / "dic.json");
  try {
    run.dic.dbar = d.at("dbar").get<double>();
    run.dic.pd = d.at("pd").get<double>();
    run.dic.dic = d.at("dic").get<double>();
    run.dic.median_plugin = d.value("plugin", "posterior-mean") == "posterior-median";
    run.dic.d_at_plugin = run.dic.dbar - run.dic.pd;
  } catch (const nlohmann::json::exception& e) {
    throw InputError((dir / "dic.json").string() + ": " + e.what());
  }
  return run;
}

}  // namespace hpot::tools
