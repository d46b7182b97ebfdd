// Acceptance battery. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Usage: acceptance [work-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hpot/baselines.hpp"
#include "hpot/distmath.hpp"
#include "hpot/hybrid.hpp"
#include "hpot/inference.hpp"
#include "hpot/risk.hpp"
#include "hpot/tools/cli.hpp"
#include "hpot/tools/io.hpp"
#include "hpot/tools/rundir.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace hpot;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "hpot");
  std::ostringstream out, err;
  const int code = tools::run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

// --------------------------------------------------------------------------

Outcome poisson_rows() {
  Outcome o;
  const auto t0 = Clock::now();
  struct Row {
    long long y0;
    double lo, hi;
  };
  for (const Row r : {Row{14, 2.6, 7.8}, Row{1, 0.0, 1.9}, Row{10, 1.6, 6.1}}) {
    const PoissonInterval ci = poisson_ci(r.y0, 3.0);
    o.require(std::fabs(ci.lo - r.lo) <= 0.05 && std::fabs(ci.hi - r.hi) <= 0.05,
              "y0=" + std::to_string(r.y0) + " gave (" + num(ci.lo) + ", " + num(ci.hi) + ")");
  }
  const double t = seconds_since(t0);
  o.require(t < 1.0, "took " + num(t) + " s");
  if (o.pass) o.detail = "(14,3) (1,3) (10,3) within 0.05 in " + num(t, 2) + " s";
  return o;
}

Outcome hybrid_battery() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(20240601);
  double worst_seam = 0.0, worst_mass = 0.0, worst_ks = 0.0;
  int draws = 0;
  for (int i = 0; i < 1000; ++i) {
    const BodyFamily fam = kAllBodyFamilies[static_cast<std::size_t>(i) % kAllBodyFamilies.size()];
    const HybridParams p = testing::random_hybrid(fam, rng);
    const double mu = p.tail.mu;
    worst_seam = std::max(worst_seam, std::fabs(hybrid_cdf(mu, p) - hybrid_cdf(std::nextafter(mu, -1e300), p)));
    worst_mass = std::max(worst_mass, std::fabs(testing::hybrid_mass(p) - 1.0));
    const auto x = hybrid_sample(100000, p, static_cast<std::uint64_t>(i) + 1);
    worst_ks = std::max(worst_ks, testing::ks_distance(x, [&](double v) { return hybrid_cdf(v, p); }));
    ++draws;
  }
  const double t = seconds_since(t0);
  o.require(worst_seam < 1e-12, "seam gap " + num(worst_seam));
  o.require(worst_mass < 1e-6, "mass error " + num(worst_mass));
  o.require(worst_ks < 0.01, "KS " + num(worst_ks));
  o.require(t < 120.0, "took " + num(t) + " s");
  if (o.pass)
    o.detail = std::to_string(draws) + " draws: max seam gap " + num(worst_seam, 2) + ", max |mass-1| " +
               num(worst_mass, 2) + ", max KS " + num(worst_ks, 3) + " in " + num(t, 3) + " s";
  return o;
}

Outcome gpd_recovery() {
  Outcome o;
  const auto t0 = Clock::now();
  struct Case {
    double sigma, xi;
    std::uint64_t seed;
  };
  std::string fits;
  for (const Case c : {Case{1.0, -0.3, 31}, Case{2.0, 0.2, 32}}) {
    Rng rng(c.seed);
    std::vector<double> x;
    for (int i = 0; i < 5000; ++i) x.push_back(gpd_quantile(rng.uniform(), {0.0, c.sigma, c.xi}));
    x.erase(std::remove_if(x.begin(), x.end(), [](double v) { return !(v > 0.0); }), x.end());
    const GpdFit fit = gpd_mle(x, 0.0);
    o.require(std::fabs(fit.sigma - c.sigma) <= 0.05 && std::fabs(fit.xi - c.xi) <= 0.05,
              "truth (" + num(c.sigma) + ", " + num(c.xi) + ") fit (" + num(fit.sigma) + ", " + num(fit.xi) + ")");
    fits += " (" + num(fit.sigma, 3) + ", " + num(fit.xi, 3) + ")";
  }
  const double t = seconds_since(t0);
  o.require(t < 10.0, "took " + num(t) + " s");
  if (o.pass) o.detail = "fits" + fits + " in " + num(t, 2) + " s";
  return o;
}

// Shared output of the simulate/fit pipeline.
struct Pipeline {
  fs::path sim, lognormal, normal;
  double lognormal_seconds = 0.0;
  double normal_seconds = 0.0;
  bool ok = false;
  std::string error;
};

std::vector<std::string> fit_args(const fs::path& sim, const fs::path& out, const std::string& model) {
  return {"fit",          "--model",  model, "--conflicts", (sim / "conflicts.csv").string(),
          "--cycles",     (sim / "cycles.csv").string(),       "--out", out.string(),
          "--iters",      "20000",    "--burnin", "10000", "--chains", "2", "--seed", "7"};
}

Pipeline run_pipeline(const fs::path& work) {
  Pipeline p;
  p.sim = work / "sim";
  p.lognormal = work / "fit-lognormal";
  p.normal = work / "fit-normal";
  std::string err;
  if (cli({"simulate", "--out", p.sim.string(), "--seed", "7"}, &err) != 0) {
    p.error = "simulate failed: " + err;
    return p;
  }
  auto t0 = Clock::now();
  if (cli(fit_args(p.sim, p.lognormal, "lognormal-gpd"), &err) != 0) {
    p.error = "lognormal fit failed: " + err;
    return p;
  }
  p.lognormal_seconds = seconds_since(t0);
  t0 = Clock::now();
  if (cli(fit_args(p.sim, p.normal, "normal-gpd"), &err) != 0) {
    p.error = "normal fit failed: " + err;
    return p;
  }
  p.normal_seconds = seconds_since(t0);
  p.ok = true;
  return p;
}

Outcome synthetic_recovery(const Pipeline& p) {
  Outcome o;
  if (!p.ok) {
    o.require(false, p.error);
    return o;
  }
  const PosteriorRun run = tools::load_run(p.lognormal);
  const auto truth = nlohmann::json::parse(tools::read_text(p.sim / "truth.json"));
  double max_rhat = 0.0;
  std::string worst;
  for (std::size_t k = 0; k < run.names.size(); ++k) {
    if (!(run.rhat[k] < 1.2)) o.require(false, run.names[k] + " R-hat " + num(run.rhat[k]));
    if (run.rhat[k] > max_rhat) {
      max_rhat = run.rhat[k];
      worst = run.names[k];
    }
  }
  int covered = 0, checked = 0;
  for (const auto& s : run.summaries) {
    const bool target = s.name.rfind("mu.intercept[", 0) == 0 || s.name == "mu.beta[A]";
    if (!target) continue;
    ++checked;
    const double v = truth.at("coefficients").at(s.name).get<double>();
    if (s.q025 <= v && v <= s.q975)
      ++covered;
    else
      o.require(false, s.name + " truth " + num(v) + " outside [" + num(s.q025) + ", " + num(s.q975) + "]");
  }
  o.require(checked == 4, "expected 4 covered scalars, found " + std::to_string(checked));
  o.require(p.lognormal_seconds < 600.0, "fit took " + num(p.lognormal_seconds) + " s");
  if (o.pass)
    o.detail = "max split R-hat " + num(max_rhat, 3) + " (" + worst + "), " + std::to_string(covered) + "/" +
               std::to_string(checked) + " covered, fit " + num(p.lognormal_seconds, 3) + " s";
  return o;
}

Outcome dic_ranking(const Pipeline& p) {
  Outcome o;
  if (!p.ok) {
    o.require(false, p.error);
    return o;
  }
  const auto ln = nlohmann::json::parse(tools::read_text(p.lognormal / "dic.json"));
  const auto nm = nlohmann::json::parse(tools::read_text(p.normal / "dic.json"));
  const double a = ln.at("dic").get<double>();
  const double b = nm.at("dic").get<double>();
  o.require(ln.at("dataset_fingerprint") == nm.at("dataset_fingerprint"), "fits saw different data");
  o.require(a < b - 10.0, "lognormal " + num(a, 6) + " vs normal " + num(b, 6));
  o.require(p.normal_seconds <= 600.0, "normal fit took " + num(p.normal_seconds) + " s");
  if (o.pass) o.detail = "DIC lognormal-gpd " + num(a, 6) + " < normal-gpd " + num(b, 6) + " - 10";
  return o;
}

Outcome quantile_regression_exactness() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(606);
  const double levels[] = {0.5, 0.8, 0.85, 0.95};
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * 6.0);
    std::vector<double> y(n);
    std::vector<std::vector<double>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
      rows[i] = {rng.uniform(2.0, 28.0), rng.uniform(0.0, 1.9)};
      y[i] = -1.3 + 0.03 * rows[i][0] - 0.15 * rows[i][1] + 0.3 * rng.normal();
    }
    const double alpha = levels[inst % 4];
    const double got = quantile_regression(y, rows, alpha).objective;
    worst = std::max(worst, std::fabs(got - testing::qr_bruteforce_objective(y, rows, alpha)));
  }
  o.require(worst <= 1e-9, "objective gap " + num(worst));

  // intercept-only fits hit the order statistic exactly
  int exact = 0, total = 0;
  for (std::size_t n : {5u, 9u, 17u, 33u, 64u}) {
    std::vector<double> y(n);
    for (auto& v : y) v = rng.normal();
    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    const std::vector<std::vector<double>> none(n);
    for (double a : levels) {
      const double na = a * static_cast<double>(n);
      if (std::fabs(na - std::round(na)) < 1e-9) continue;  // any point between two order statistics is optimal
      ++total;
      const double q = sorted[static_cast<std::size_t>(std::ceil(na)) - 1];
      if (quantile_regression(y, none, a).coefficients[0] == q) ++exact;
    }
  }
  o.require(exact == total, std::to_string(total - exact) + " intercept-only fits missed the empirical quantile");
  const double t = seconds_since(t0);
  o.require(t < 30.0, "took " + num(t) + " s");
  if (o.pass)
    o.detail = "200 instances max gap " + num(worst, 2) + ", " + std::to_string(exact) + "/" + std::to_string(total) +
               " intercept-only exact, " + num(t, 2) + " s";
  return o;
}

Outcome diagnostics_sanity() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(707);
  std::vector<double> e(100000);
  for (auto& v : e) v = -std::log(rng.uniform());
  std::vector<double> grid, u, me;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.1 * i);
  for (const auto& r : mean_residual_life(e, grid)) {
    u.push_back(r.threshold);
    me.push_back(r.mean_excess);
  }
  const double slope = testing::ols_slope(u, me);
  o.require(std::fabs(slope) < 0.03, "MRL slope " + num(slope));

  const GpdParams truth{-1.0, 1.0, -0.3};
  std::vector<double> g(5000);
  for (auto& v : g) v = gpd_quantile(rng.uniform(), truth);
  std::vector<double> sgrid;
  for (int i = 0; i <= 16; ++i) sgrid.push_back(-1.0 + 0.05 * i);
  const auto rows = threshold_stability(g, sgrid);
  std::size_t covered = 0;
  for (const auto& r : rows)
    if (r.flag.empty() && std::fabs(r.xi - truth.xi) <= 1.96 * r.se_xi) ++covered;
  const double frac = static_cast<double>(covered) / static_cast<double>(rows.size());
  o.require(frac >= 0.9, "xi coverage " + num(frac));
  const double t = seconds_since(t0);
  o.require(t < 60.0, "took " + num(t) + " s");
  if (o.pass)
    o.detail = "MRL slope " + num(slope, 2) + ", xi CI coverage " + std::to_string(covered) + "/" +
               std::to_string(rows.size()) + ", " + num(t, 2) + " s";
  return o;
}

Outcome risk_formulas() {
  Outcome o;
  const auto t0 = Clock::now();
  const double a = cycle_crash_risk({-1.0, 1.0, 0.0});
  const double b = cycle_crash_risk({-1.0, 0.5, 0.2});
  o.require(std::fabs(a - std::exp(-1.0)) <= 1e-12, "exponential case " + num(a, 17));
  o.require(std::fabs(b - std::pow(1.4, -5.0)) <= 1e-12, "xi=0.2 case " + num(b, 17));
  const double clamp = cycle_crash_risk({-1.520, std::exp(-0.522), -0.393});
  o.require(clamp == 0.0, "endpoint clamp gave " + num(clamp));
  const std::vector<double> r{0.0002, 0.0003, 0.0005};
  o.require(annualize(r, 4.0, 2.0 * 8760.0) == 2.0 * annualize(r, 4.0, 8760.0), "horizon doubling");
  o.require(annualize(r, 4.0, 4.0) == 0.0002 + 0.0003 + 0.0005, "T = t identity");
  o.require(std::fabs(annualize(std::vector<double>{0.001}, 4.0, 8760.0) - 2.19) <= 1e-12, "2.19 example");
  o.require(annualize(std::vector<double>{0, 0}, 4.0, 8760.0) == 0.0, "zero risks");
  const double t = seconds_since(t0);
  o.require(t < 1.0, "took " + num(t) + " s");
  if (o.pass) o.detail = "closed forms, clamp and linearity exact, " + num(t, 2) + " s";
  return o;
}

Outcome reproducibility(const Pipeline& p, const fs::path& work) {
  Outcome o;
  if (!p.ok) {
    o.require(false, p.error);
    return o;
  }
  // risk on the first run, snapshot, then redo everything into the same paths
  const auto risk = [&](std::string* err) {
    return cli({"risk", "--run", p.lognormal.string(), "--cycles", (p.sim / "cycles.csv").string(), "--crashes",
                (p.sim / "crashes.csv").string()},
               err);
  };
  std::string err;
  if (risk(&err) != 0) {
    o.require(false, "risk failed: " + err);
    return o;
  }
  const fs::path snap = work / "first";
  fs::remove_all(snap);
  fs::create_directories(snap);
  fs::copy(p.sim, snap / "sim", fs::copy_options::recursive);
  fs::copy(p.lognormal, snap / "fit", fs::copy_options::recursive);

  fs::remove_all(p.sim);
  fs::remove_all(p.lognormal);
  if (cli({"simulate", "--out", p.sim.string(), "--seed", "7"}, &err) != 0 ||
      cli(fit_args(p.sim, p.lognormal, "lognormal-gpd"), &err) != 0 || risk(&err) != 0) {
    o.require(false, "second pipeline run failed: " + err);
    return o;
  }
  std::size_t compared = 0;
  for (const auto& [a, b] : {std::pair{snap / "sim", p.sim}, std::pair{snap / "fit", p.lognormal}}) {
    for (const auto& entry : fs::directory_iterator(a)) {
      const fs::path other = b / entry.path().filename();
      ++compared;
      if (!fs::exists(other) || tools::read_text(entry.path()) != tools::read_text(other))
        o.require(false, entry.path().filename().string() + " differs");
    }
  }

  const auto truth = nlohmann::json::parse(tools::read_text(p.sim / "truth.json"));
  const auto est = nlohmann::json::parse(tools::read_text(p.lognormal / "risk.json"));
  std::string inside;
  for (const auto& site : est) {
    const std::string id = site.at("site").get<std::string>();
    const double c = truth.at("true_annual_crashes").at(id).get<double>();
    const double lo = site.at("ci_lo").get<double>(), hi = site.at("ci_hi").get<double>();
    if (!(lo <= c && c <= hi)) o.require(false, "site " + id + " true " + num(c) + " outside [" + num(lo) + ", " + num(hi) + "]");
    inside += " " + id + ":" + num(c, 3) + " in [" + num(lo, 3) + ", " + num(hi, 3) + "]";
  }
  if (o.pass) o.detail = std::to_string(compared) + " artifacts byte-identical;" + inside;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "hpot-acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  bool all = true;
  const auto report = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all = all && o.pass;
    std::cout << "criterion " << id << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
  };

  report(1, "poisson intervals", poisson_rows);
  report(2, "hybrid battery", hybrid_battery);
  report(3, "gpd mle recovery", gpd_recovery);
  Pipeline pipe;
  try {
    pipe = run_pipeline(work);
  } catch (const std::exception& e) {
    pipe.error = e.what();
  }
  report(4, "synthetic recovery", [&] { return synthetic_recovery(pipe); });
  report(5, "dic ranking", [&] { return dic_ranking(pipe); });
  report(6, "quantile regression exactness", quantile_regression_exactness);
  report(7, "diagnostics sanity", diagnostics_sanity);
  report(8, "risk formulas", risk_formulas);
  report(9, "end-to-end reproducibility", [&] { return reproducibility(pipe, work); });
  return all ? 0 : 1;
}
