#include "hpot/tools/cli.hpp"

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "hpot/baselines.hpp"
#include "hpot/errors.hpp"
#include "hpot/risk.hpp"
#include "hpot/tools/config.hpp"
#include "hpot/tools/generator.hpp"
#include "hpot/tools/io.hpp"
#include "hpot/tools/rundir.hpp"

namespace hpot::tools {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw InputError(std::string("missing required input ") + flag);
}

// --link mu=A,V  (an empty list makes the slot intercept-only)
void apply_link_flag(const std::string& text, ModelSpec& spec) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw InputError("--link expects <parameter>=<covariates>, got '" + text + "'");
  const std::string key = text.substr(0, eq);
  static const char* generic[kNumSlots] = {"mu", "phi", "body1", "body2"};
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    if (key == generic[s] || key == slot_name(spec.family, static_cast<Slot>(s))) {
      spec.links.covariates[s] = parse_covariate_list(text.substr(eq + 1));
      return;
    }
  }
  throw InputError("--link: unknown parameter '" + key + "'");
}

struct FitFlags {
  std::string config, conflicts, cycles, out, model;
  std::vector<std::string> links;
  std::optional<std::size_t> iters, burnin, chains, thin, window;
  std::optional<std::uint64_t> seed;
  std::optional<double> target;
};

int cmd_fit(const FitFlags& f, std::ostream& out) {
  RunConfig cfg = default_run_config();
  if (!f.config.empty()) load_config(f.config, cfg);
  if (!f.model.empty()) cfg.spec.family = parse_model_name(f.model);
  for (const auto& l : f.links) apply_link_flag(l, cfg.spec);
  if (!f.conflicts.empty()) cfg.conflicts = f.conflicts;
  if (!f.cycles.empty()) cfg.cycles = f.cycles;
  if (!f.out.empty()) cfg.out = f.out;
  if (f.iters) cfg.mcmc.iterations = *f.iters;
  if (f.burnin) cfg.mcmc.burn_in = *f.burnin;
  if (f.chains) cfg.mcmc.chains = *f.chains;
  if (f.thin) cfg.mcmc.thinning = *f.thin;
  if (f.window) cfg.mcmc.adaptation_window = *f.window;
  if (f.seed) cfg.mcmc.seed = *f.seed;
  if (f.target) cfg.mcmc.target_acceptance = *f.target;
  require(cfg.conflicts, "--conflicts");
  require(cfg.cycles, "--cycles");
  require(cfg.out, "--out");
  cfg.mcmc.validate();

  IngestReport report;
  const HierarchicalProblem problem{cfg.spec, ingest(cfg.conflicts, cfg.cycles, report)};
  const PosteriorRun run = fit(problem, cfg.mcmc);
  write_run(cfg.out, run, cfg, problem.data, report);

  double max_rhat = 0.0;
  for (double r : run.rhat)
    if (std::isfinite(r)) max_rhat = std::max(max_rhat, r);
  out << "model " << model_name(cfg.spec.family) << ": " << report.accepted << " conflicts, "
      << report.rejected() << " rows rejected\n";
  out << "DIC " << fixed(run.dic.dic, 1) << " (Dbar " << fixed(run.dic.dbar, 1) << ", pD " << fixed(run.dic.pd, 1)
      << ")" << (run.dic.median_plugin ? " [median plug-in]" : "") << "\n";
  if (cfg.mcmc.chains >= 2)
    out << "max split R-hat " << fixed(max_rhat, 3) << (max_rhat < 1.2 ? "" : "  (not converged)") << "\n";
  out << "wrote " << cfg.out.string() << "\n";
  return kExitOk;
}

int cmd_ingest(const std::string& conflicts, const std::string& cycles, const std::string& out_path,
               std::ostream& out) {
  require(conflicts, "--conflicts");
  require(cycles, "--cycles");
  IngestReport report;
  const Dataset d = ingest(conflicts, cycles, report);
  std::ostringstream os;
  write_site_summary(os, summarize_sites(d));
  if (!out_path.empty()) write_text(out_path, os.str());
  out << os.str();
  out << "rows " << report.rows << ", accepted " << report.accepted << ", rejected " << report.rejected()
      << " (pet <= 0: " << report.rejected_nonpositive << ", pet > 4: " << report.rejected_above_max << ")\n";
  return kExitOk;
}

std::string scan_csv(std::span<const ScanRow> rows) {
  std::ostringstream os;
  os << "threshold,n_exceed,mean_excess,me_lo,me_hi,sigma,xi,sigma_star,se_sigma_star,se_xi,flag\n";
  for (const auto& r : rows)
    os << fmt(r.threshold) << ',' << r.n_exceed << ',' << fmt(r.mean_excess) << ',' << fmt(r.me_lo) << ','
       << fmt(r.me_hi) << ',' << fmt(r.sigma) << ',' << fmt(r.xi) << ',' << fmt(r.sigma_star) << ','
       << fmt(r.se_sigma_star) << ',' << fmt(r.se_xi) << ',' << r.flag << '\n';
  return os.str();
}

int cmd_diagnose(const std::string& conflicts, const std::string& out_dir, const std::string& site,
                 std::size_t points, std::ostream& out) {
  require(conflicts, "--conflicts");
  require(out_dir, "--out");
  IngestReport report;
  const auto obs = read_conflicts(fs::path(conflicts), report);
  std::vector<std::string> sites;
  for (const auto& o : obs)
    if (std::find(sites.begin(), sites.end(), o.site_id) == sites.end()) sites.push_back(o.site_id);
  if (!site.empty()) {
    if (std::find(sites.begin(), sites.end(), site) == sites.end())
      throw InputError("--site '" + site + "' has no conflicts");
    sites = {site};
  }
  fs::create_directories(out_dir);
  for (const auto& s : sites) {
    std::vector<double> x;
    for (const auto& o : obs)
      if (o.site_id == s) x.push_back(o.negated());
    const auto grid = default_grid(x, points);
    const auto rows = threshold_scan(x, grid);
    const fs::path path = fs::path(out_dir) / ("scan-" + s + ".csv");
    write_text(path, scan_csv(rows));
    out << "site " << s << ": " << x.size() << " conflicts, " << rows.size() << " thresholds -> " << path.string()
        << "\n";
  }
  return kExitOk;
}

int cmd_qreg(const std::string& conflicts, const std::string& cycles, const std::string& out_dir,
             const std::string& covariates, std::vector<double> levels, std::ostream& out) {
  require(conflicts, "--conflicts");
  require(cycles, "--cycles");
  require(out_dir, "--out");
  IngestReport report;
  const Dataset d = ingest(conflicts, cycles, report);
  const auto covs = parse_covariate_list(covariates);
  std::vector<double> y;
  std::vector<std::vector<double>> rows;
  for (std::size_t c = 0; c < d.cycles.size(); ++c) {
    for (double v : d.values[c]) {
      y.push_back(v);
      std::vector<double> r;
      for (Covariate cv : covs) r.push_back(d.cycles[c].covariate(cv));
      rows.push_back(std::move(r));
    }
  }
  if (levels.empty()) levels = default_quantile_levels();
  const auto scan = quantile_grid_scan(y, rows, levels);

  std::ostringstream os;
  os << "alpha,coef_intercept,coef_V,coef_A,coef_P,n_exceed,sigma,xi\n";
  for (const auto& r : scan) {
    os << fmt(r.alpha) << ',' << fmt(r.coefficients[0]);
    for (Covariate cv : kAllCovariates) {
      os << ',';
      const auto it = std::find(covs.begin(), covs.end(), cv);
      if (it != covs.end()) os << fmt(r.coefficients[1 + static_cast<std::size_t>(it - covs.begin())]);
    }
    os << ',' << r.n_exceed << ',' << fmt(r.sigma) << ',' << fmt(r.xi) << '\n';
  }
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "qscan.csv", os.str());

  std::ostringstream flags;
  flags << "alpha,se_xi,flag\n";
  for (const auto& r : scan) flags << fmt(r.alpha) << ',' << fmt(r.se_xi) << ',' << r.flag << '\n';
  write_text(fs::path(out_dir) / "qscan-flags.csv", flags.str());

  const auto [lo, hi] = stable_window(scan);
  out << scan.size() << " levels over " << y.size() << " conflicts -> " << (fs::path(out_dir) / "qscan.csv").string()
      << "\n";
  if (lo != static_cast<std::size_t>(-1))
    out << "xi stable for alpha in [" << fixed(scan[lo].alpha, 3) << ", " << fixed(scan[hi].alpha, 3) << "]\n";
  return kExitOk;
}

int cmd_risk(const std::string& run_dir, const std::string& cycles_path, const std::string& crashes_path,
             std::optional<double> t_hours, std::optional<double> T_hours, const std::string& out_path,
             std::ostream& out) {
  require(run_dir, "--run");
  require(cycles_path, "--cycles");
  const PosteriorRun run = load_run(run_dir);
  RunConfig cfg = default_run_config();
  const fs::path resolved = fs::path(run_dir) / "resolved-config";
  if (fs::exists(resolved)) load_config(resolved, cfg);
  const double t = t_hours.value_or(cfg.t_hours);
  const double T = T_hours.value_or(cfg.T_hours);

  const Dataset data = Dataset::build(read_cycles(fs::path(cycles_path)), {});
  std::vector<CrashRecord> crashes;
  if (!crashes_path.empty()) crashes = read_crashes(fs::path(crashes_path));

  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < data.sites.size(); ++s) {
    const auto& cyc = data.site_cycles[s];
    const CrashEstimate est = posterior_risk(run, data, cyc, t, T);
    nlohmann::ordered_json j;
    j["site"] = data.sites[s];
    j["n_cycles"] = cyc.size();
    j["t_hours"] = t;
    j["T_hours"] = T;
    j["crash_mean"] = est.mean;
    j["ci_lo"] = est.lo;
    j["ci_hi"] = est.hi;
    long long y0 = 0, years = 0;
    for (const auto& c : crashes) {
      if (c.site_id != data.sites[s]) continue;
      y0 += c.count;
      ++years;
    }
    if (years > 0) {
      const PoissonInterval ci = poisson_ci(y0, static_cast<double>(years));
      j["observed"] = {{"y0", y0}, {"years", years}, {"mean", ci.mean}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi}};
    } else {
      j["observed"] = nullptr;
    }
    out << "site " << data.sites[s] << ": crashes/horizon " << fixed(est.mean, 3) << " [" << fixed(est.lo, 3) << ", "
        << fixed(est.hi, 3) << "]";
    if (years > 0) out << "  observed " << y0 << " in " << years << " years";
    out << "\n";
    doc.push_back(j);
  }
  const fs::path target = out_path.empty() ? fs::path(run_dir) / "risk.json" : fs::path(out_path);
  write_text(target, doc.dump(2) + "\n");
  out << "wrote " << target.string() << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& out_dir, std::uint64_t seed, const std::string& config_path, std::ostream& out) {
  require(out_dir, "--out");
  GeneratorConfig g = default_generator();
  if (!config_path.empty()) {
    try {
      g = generator_from_json(nlohmann::json::parse(read_text(config_path)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(config_path + ": " + e.what());
    }
  }
  const SimulatedData data = simulate(g, seed);
  fs::create_directories(out_dir);
  std::ostringstream c, y, k;
  write_conflicts(c, data.conflicts);
  write_cycles(y, data.cycles);
  write_crashes(k, data.crashes);
  write_text(fs::path(out_dir) / "conflicts.csv", c.str());
  write_text(fs::path(out_dir) / "cycles.csv", y.str());
  write_text(fs::path(out_dir) / "crashes.csv", k.str());
  write_text(fs::path(out_dir) / "truth.json", truth_json(g, seed, &data).dump(2) + "\n");
  out << data.cycles.size() << " cycles, " << data.conflicts.size() << " conflicts (" << data.dropped_draws
      << " draws outside (0, 4] s dropped) -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& dirs, std::ostream& out) {
  if (dirs.size() < 2) throw InputError("compare needs at least two run directories");
  std::vector<ModelComparisonInput> in;
  for (const auto& d : dirs) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(fs::path(d) / "dic.json"));
      in.push_back({d + " (" + j.at("model").get<std::string>() + ")", j.at("dic").get<double>(),
                    parse_fingerprint(j.at("dataset_fingerprint").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw InputError((fs::path(d) / "dic.json").string() + ": " + e.what());
    }
  }
  const auto ranked = compare_models(in);
  out << "rank,run,dic,delta,verdict\n";
  for (std::size_t i = 0; i < ranked.size(); ++i)
    out << i + 1 << ',' << ranked[i].label << ',' << fixed(ranked[i].dic, 1) << ',' << fixed(ranked[i].delta, 1)
        << ',' << ranked[i].verdict << '\n';
  return kExitOk;
}

int cmd_ci(long long crashes, double years, bool json, std::ostream& out) {
  const PoissonInterval ci = poisson_ci(crashes, years);
  if (json) {
    nlohmann::ordered_json j{{"y0", crashes}, {"years", years}, {"mean", ci.mean}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi}};
    out << j.dump(2) << "\n";
  } else {
    out << "mean " << fixed(ci.mean, 3) << " ci (" << fixed(ci.lo, 1) << ", " << fixed(ci.hi, 1) << ")  [" << fixed(ci.lo, 4)
        << ", " << fixed(ci.hi, 4) << "]\n";
  }
  return kExitOk;
}

int cmd_summarize(const std::string& run_dir, const std::string& out_path, std::ostream& out) {
  require(run_dir, "--run");
  const PosteriorRun run = load_run(run_dir);
  const std::string csv = summary_csv(run.summaries);
  if (!out_path.empty()) write_text(out_path, csv);
  out << std::left << std::setw(24) << "parameter" << std::right << std::setw(10) << "mean" << std::setw(10) << "sd"
      << std::setw(10) << "2.5%" << std::setw(10) << "97.5%" << std::setw(8) << "R-hat" << "\n";
  for (std::size_t k = 0; k < run.summaries.size(); ++k) {
    const auto& s = run.summaries[k];
    out << std::left << std::setw(24) << s.name << std::right << std::setw(10) << fixed(s.mean, 3) << std::setw(10)
        << fixed(s.sd, 3) << std::setw(10) << fixed(s.q025, 3) << std::setw(10) << fixed(s.q975, 3) << std::setw(8)
        << (std::isfinite(run.rhat[k]) ? fixed(run.rhat[k], 3) : "-") << "\n";
  }
  out << "DIC " << fixed(run.dic.dic, 1) << " (Dbar " << fixed(run.dic.dbar, 1) << ", pD " << fixed(run.dic.pd, 1)
      << ")\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid body/GPD threshold estimation for traffic conflicts", "hpot"};
  app.require_subcommand(1);

  FitFlags ff;
  auto* fit_cmd = app.add_subcommand("fit", "fit a hierarchical hybrid model by MCMC");
  fit_cmd->add_option("--config", ff.config, "INI run config or truth.json (model and links)");
  fit_cmd->add_option("--conflicts", ff.conflicts, "conflicts.csv");
  fit_cmd->add_option("--cycles", ff.cycles, "cycles.csv");
  fit_cmd->add_option("--out", ff.out, "output run directory");
  fit_cmd->add_option("--model", ff.model, "normal-gpd, cauchy-gpd, logistic-gpd, gamma-gpd or lognormal-gpd");
  fit_cmd->add_option("--link", ff.links, "parameter=covariates, e.g. mu=A,V (repeatable)");
  fit_cmd->add_option("--iters", ff.iters, "total iterations per chain");
  fit_cmd->add_option("--burnin", ff.burnin, "burn-in iterations");
  fit_cmd->add_option("--chains", ff.chains, "number of chains");
  fit_cmd->add_option("--seed", ff.seed, "random seed");
  fit_cmd->add_option("--thin", ff.thin, "keep every k-th post burn-in draw");
  fit_cmd->add_option("--window", ff.window, "adaptation window");
  fit_cmd->add_option("--target", ff.target, "target acceptance rate");

  std::string conflicts, cycles, out_path, site, run_dir, crashes_path, covariates = "V,A,P", gen_config;
  std::size_t points = kDefaultGridPoints;
  std::vector<double> levels;
  std::optional<double> t_hours, T_hours;
  std::uint64_t seed = 1;
  long long crash_count = 0;
  double years = 0;
  bool json = false;
  std::vector<std::string> dirs;

  auto* ingest_cmd = app.add_subcommand("ingest", "validate inputs and print per-site summaries");
  ingest_cmd->add_option("--conflicts", conflicts)->required();
  ingest_cmd->add_option("--cycles", cycles)->required();
  ingest_cmd->add_option("--out", out_path, "also write the summary CSV here");

  auto* diag_cmd = app.add_subcommand("diagnose", "mean residual life and threshold stability scans");
  diag_cmd->add_option("--conflicts", conflicts)->required();
  diag_cmd->add_option("--out", out_path, "output directory")->required();
  diag_cmd->add_option("--site", site, "only this site");
  diag_cmd->add_option("--grid-points", points, "thresholds between the 50% and 98% quantiles");

  auto* qreg_cmd = app.add_subcommand("qreg", "quantile regression thresholds and GPD fits across levels");
  qreg_cmd->add_option("--conflicts", conflicts)->required();
  qreg_cmd->add_option("--cycles", cycles)->required();
  qreg_cmd->add_option("--out", out_path, "output directory")->required();
  qreg_cmd->add_option("--covariates", covariates, "covariates in the threshold surface");
  qreg_cmd->add_option("--levels", levels, "quantile levels (default 0.80..0.95 by 0.025)");

  auto* risk_cmd = app.add_subcommand("risk", "posterior crash estimates per site");
  risk_cmd->add_option("--run", run_dir, "fit output directory")->required();
  risk_cmd->add_option("--cycles", cycles, "cycles.csv the run was fitted to")->required();
  risk_cmd->add_option("--crashes", crashes_path, "crashes.csv for observed intervals");
  risk_cmd->add_option("--t-hours", t_hours, "observation hours behind each site's cycles");
  risk_cmd->add_option("--T-hours", T_hours, "projection horizon in hours");
  risk_cmd->add_option("--out", out_path, "risk JSON path (default <run>/risk.json)");

  auto* sim_cmd = app.add_subcommand("simulate", "draw synthetic data from a known model");
  sim_cmd->add_option("--out", out_path, "output directory")->required();
  sim_cmd->add_option("--seed", seed, "random seed");
  sim_cmd->add_option("--config", gen_config, "generator JSON (same schema as truth.json)");

  auto* cmp_cmd = app.add_subcommand("compare", "rank fitted runs by DIC");
  cmp_cmd->add_option("runs", dirs, "run directories")->required();

  auto* ci_cmd = app.add_subcommand("ci", "Poisson interval for an observed crash count");
  ci_cmd->add_option("--crashes", crash_count, "crashes observed")->required();
  ci_cmd->add_option("--years", years, "years of observation")->required();
  ci_cmd->add_flag("--json", json, "print JSON");

  auto* sum_cmd = app.add_subcommand("summarize", "posterior table from stored traces");
  sum_cmd->add_option("--run", run_dir, "fit output directory")->required();
  sum_cmd->add_option("--out", out_path, "also write summary CSV here");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*fit_cmd) return cmd_fit(ff, out);
    if (*ingest_cmd) return cmd_ingest(conflicts, cycles, out_path, out);
    if (*diag_cmd) return cmd_diagnose(conflicts, out_path, site, points, out);
    if (*qreg_cmd) return cmd_qreg(conflicts, cycles, out_path, covariates, levels, out);
    if (*risk_cmd) return cmd_risk(run_dir, cycles, crashes_path, t_hours, T_hours, out_path, out);
    if (*sim_cmd) return cmd_simulate(out_path, seed, gen_config, out);
    if (*cmp_cmd) return cmd_compare(dirs, out);
    if (*ci_cmd) return cmd_ci(crash_count, years, json, out);
    if (*sum_cmd) return cmd_summarize(run_dir, out_path, out);
  } catch (const NumericalError& e) {
    err << "hpot: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InputError& e) {
    err << "hpot: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "hpot: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace hpot::tools
