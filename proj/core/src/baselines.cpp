#include "hpot/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hpot/distmath.hpp"
#include "hpot/errors.hpp"

namespace hpot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZ975 = 1.959963984540054;

void add_flag(std::string& flag, std::string_view reason) {
  if (!flag.empty()) flag += ';';
  flag += reason;
}

void check_grid(std::span<const double> data, std::span<const double> grid) {
  if (data.empty()) throw InputError("threshold scan: empty data");
  for (double x : data)
    if (!std::isfinite(x)) throw InputError("threshold scan: non-finite data value");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw InputError("threshold scan: non-finite grid point");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("threshold scan: grid must be strictly increasing");
  }
}

ScanRow blank_row(double u) {
  ScanRow r;
  r.threshold = u;
  r.mean_excess = r.me_lo = r.me_hi = kNaN;
  r.sigma = r.xi = r.sigma_star = r.se_sigma_star = r.se_xi = kNaN;
  return r;
}

std::vector<double> excesses_over(std::span<const double> data, double u) {
  std::vector<double> out;
  for (double x : data)
    if (x > u) out.push_back(x);
  return out;
}

// ---------------------------------------------------------------------------
// Bounded-variable revised simplex for  min c'x  s.t.  A x = b,  l <= x <= u.
// Sizes here are a handful of rows by a few thousand columns, so the basis
// inverse is simply refactorized each iteration.

class BoundedSimplex {
 public:
  BoundedSimplex(Eigen::MatrixXd a, Eigen::VectorXd b, std::vector<double> lo, std::vector<double> hi)
      : a_(std::move(a)), b_(std::move(b)), lo_(std::move(lo)), hi_(std::move(hi)) {}

  // Starting point: given basis, every other variable at `init` (lower
  // bound when init is empty).
  void start(std::vector<std::size_t> basis, const std::vector<double>& init = {}) {
    basis_ = std::move(basis);
    const auto n = static_cast<std::size_t>(a_.cols());
    x_.assign(n, 0.0);
    in_basis_.assign(n, -1);
    for (std::size_t j = 0; j < n; ++j) x_[j] = init.empty() ? lo_[j] : init[j];
    for (std::size_t r = 0; r < basis_.size(); ++r) in_basis_[basis_[r]] = static_cast<int>(r);
    refresh();
  }

  // Returns false if the iteration limit is hit; unboundedness cannot occur
  // for the problems built below (every variable is bounded or the phase-1
  // objective is bounded below by zero).
  bool optimize(const std::vector<double>& cost, const std::vector<bool>& frozen) {
    const auto n = static_cast<std::size_t>(a_.cols());
    const std::size_t max_iter = 50 * (n + 10);
    std::size_t degenerate_run = 0;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
      const bool bland = degenerate_run >= 50;
      Eigen::VectorXd cb(static_cast<Eigen::Index>(basis_.size()));
      for (std::size_t r = 0; r < basis_.size(); ++r) cb[static_cast<Eigen::Index>(r)] = cost[basis_[r]];
      const Eigen::VectorXd pi = lu_.transpose().solve(cb);

      std::size_t enter = n;
      double best = 0.0;
      int dir = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (in_basis_[j] >= 0 || frozen[j]) continue;
        const double rc = cost[j] - pi.dot(a_.col(static_cast<Eigen::Index>(j)));
        const double tol = kTol * (1.0 + std::abs(cost[j]));
        int d = 0;
        if (rc < -tol && x_[j] < hi_[j]) d = +1;
        if (rc > tol && x_[j] > lo_[j]) d = -1;
        if (d == 0) continue;
        if (bland) {
          enter = j;
          dir = d;
          break;
        }
        if (std::abs(rc) > best) {
          best = std::abs(rc);
          enter = j;
          dir = d;
        }
      }
      if (enter == n) return true;

      const Eigen::VectorXd w = lu_.solve(a_.col(static_cast<Eigen::Index>(enter)));
      double t = hi_[enter] - lo_[enter];  // bound flip
      std::size_t leave = basis_.size();
      bool leave_to_upper = false;
      for (std::size_t r = 0; r < basis_.size(); ++r) {
        const double change = -dir * w[static_cast<Eigen::Index>(r)];
        if (std::abs(change) < kPivotTol) continue;
        const std::size_t j = basis_[r];
        double limit;
        bool to_upper;
        if (change < 0.0) {
          limit = (x_[j] - lo_[j]) / -change;
          to_upper = false;
        } else {
          if (!std::isfinite(hi_[j])) continue;
          limit = (hi_[j] - x_[j]) / change;
          to_upper = true;
        }
        limit = std::max(limit, 0.0);
        const bool better = limit < t - 1e-14 ||
                            (limit <= t + 1e-14 && leave < basis_.size() && basis_[r] < basis_[leave]);
        if (better) {
          t = limit;
          leave = r;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(t)) throw NumericalError("quantile regression: unbounded linear program");
      degenerate_run = t <= 1e-14 ? degenerate_run + 1 : 0;

      if (leave == basis_.size()) {
        x_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
      } else {
        const std::size_t out = basis_[leave];
        x_[enter] += dir * t;
        x_[out] = leave_to_upper ? hi_[out] : lo_[out];
        in_basis_[out] = -1;
        basis_[leave] = enter;
        in_basis_[enter] = static_cast<int>(leave);
      }
      refresh();
    }
    return false;
  }

  // Swaps basic variable `out` for a nonbasic one with a usable pivot without
  // moving the point; returns false if none exists.
  bool pivot_out(std::size_t out, const std::vector<bool>& frozen) {
    const auto n = static_cast<std::size_t>(a_.cols());
    const auto r = static_cast<Eigen::Index>(in_basis_[out]);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_.size()));
    e[r] = 1.0;
    const Eigen::VectorXd row = lu_.transpose().solve(e);  // row r of B^-1
    for (std::size_t j = 0; j < n; ++j) {
      if (in_basis_[j] >= 0 || frozen[j]) continue;
      if (std::abs(row.dot(a_.col(static_cast<Eigen::Index>(j)))) > 1e-7) {
        in_basis_[out] = -1;
        basis_[static_cast<std::size_t>(r)] = j;
        in_basis_[j] = static_cast<int>(r);
        refresh();
        return true;
      }
    }
    return false;
  }

  const std::vector<double>& x() const { return x_; }
  const std::vector<std::size_t>& basis() const { return basis_; }
  bool is_basic(std::size_t j) const { return in_basis_[j] >= 0; }

 private:
  static constexpr double kTol = 1e-11;
  static constexpr double kPivotTol = 1e-10;

  void refresh() {
    const auto p = static_cast<Eigen::Index>(basis_.size());
    Eigen::MatrixXd bm(p, p);
    for (Eigen::Index r = 0; r < p; ++r) bm.col(r) = a_.col(static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(r)]));
    lu_.compute(bm);
    Eigen::VectorXd rhs = b_;
    for (std::size_t j = 0; j < x_.size(); ++j)
      if (in_basis_[j] < 0 && x_[j] != 0.0) rhs -= x_[j] * a_.col(static_cast<Eigen::Index>(j));
    const Eigen::VectorXd xb = lu_.solve(rhs);
    for (Eigen::Index r = 0; r < p; ++r) x_[basis_[static_cast<std::size_t>(r)]] = xb[r];
  }

  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  std::vector<double> lo_, hi_;
  std::vector<double> x_;
  std::vector<std::size_t> basis_;
  std::vector<int> in_basis_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace

std::vector<double> default_grid(std::span<const double> data, std::size_t points) {
  if (data.size() < 2) throw InputError("default_grid: need at least two data values");
  if (points < 2) throw InputError("default_grid: need at least two grid points");
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double a = q(0.5), b = q(0.98);
  if (!(b > a)) throw InputError("default_grid: data have no spread between the 50% and 98% quantiles");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

std::vector<ScanRow> mean_residual_life(std::span<const double> data, std::span<const double> grid) {
  check_grid(data, grid);
  const double xmax = *std::max_element(data.begin(), data.end());
  std::vector<ScanRow> rows;
  for (double u : grid) {
    ScanRow r = blank_row(u);
    const auto ex = excesses_over(data, u);
    r.n_exceed = ex.size();
    if (u >= xmax) add_flag(r.flag, "above_max");
    if (ex.size() < 5) add_flag(r.flag, "few_exceedances");
    if (!ex.empty()) {
      double s = 0.0;
      for (double x : ex) s += x - u;
      const double m = s / static_cast<double>(ex.size());
      r.mean_excess = m;
      if (ex.size() >= 2) {
        double ss = 0.0;
        for (double x : ex) ss += (x - u - m) * (x - u - m);
        const double sd = std::sqrt(ss / static_cast<double>(ex.size() - 1));
        const double half = kZ975 * sd / std::sqrt(static_cast<double>(ex.size()));
        r.me_lo = m - half;
        r.me_hi = m + half;
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ScanRow> threshold_stability(std::span<const double> data, std::span<const double> grid) {
  check_grid(data, grid);
  std::vector<ScanRow> rows;
  for (double u : grid) {
    ScanRow r = blank_row(u);
    const auto ex = excesses_over(data, u);
    r.n_exceed = ex.size();
    if (ex.empty()) {
      add_flag(r.flag, "no_exceedances");
      rows.push_back(std::move(r));
      continue;
    }
    try {
      const GpdFit fit = gpd_mle(ex, u);
      r.sigma = fit.sigma;
      r.xi = fit.xi;
      r.sigma_star = fit.sigma - fit.xi * u;
      const auto& c = fit.covariance;
      const double var_star = c[0][0] - 2.0 * u * c[0][1] + u * u * c[1][1];
      r.se_xi = c[1][1] >= 0.0 ? std::sqrt(c[1][1]) : kNaN;
      r.se_sigma_star = var_star >= 0.0 ? std::sqrt(var_star) : kNaN;
      if (!std::isfinite(r.se_xi) || !std::isfinite(r.se_sigma_star)) add_flag(r.flag, "no_covariance");
    } catch (const std::exception&) {
      add_flag(r.flag, "mle_failed");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ScanRow> threshold_scan(std::span<const double> data, std::span<const double> grid) {
  auto mrl = mean_residual_life(data, grid);
  const auto stab = threshold_stability(data, grid);
  for (std::size_t i = 0; i < mrl.size(); ++i) {
    auto& r = mrl[i];
    const auto& s = stab[i];
    r.sigma = s.sigma;
    r.xi = s.xi;
    r.sigma_star = s.sigma_star;
    r.se_sigma_star = s.se_sigma_star;
    r.se_xi = s.se_xi;
    std::string merged = r.flag;
    std::istringstream parts(s.flag);
    for (std::string part; std::getline(parts, part, ';');)
      if (merged.find(part) == std::string::npos) add_flag(merged, part);
    r.flag = std::move(merged);
  }
  return mrl;
}

// ---------------------------------------------------------------------------

double pinball_loss(double residual, double alpha) {
  return residual >= 0.0 ? alpha * residual : (alpha - 1.0) * residual;
}

double QuantileRegressionFit::predict(std::span<const double> row) const {
  if (row.size() + 1 != coefficients.size())
    throw InputError("quantile regression: prediction row has the wrong number of covariates");
  double v = coefficients[0];
  for (std::size_t k = 0; k < row.size(); ++k) v += coefficients[k + 1] * row[k];
  return v;
}

QuantileRegressionFit quantile_regression(std::span<const double> y, const std::vector<std::vector<double>>& rows,
                                          double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("quantile regression: alpha must be in (0, 1)");
  if (rows.size() != y.size()) throw InputError("quantile regression: rows and responses differ in length");
  if (y.empty()) throw InputError("quantile regression: no observations");
  const std::size_t n = y.size();
  const std::size_t p = rows[0].size() + 1;
  for (const auto& r : rows)
    if (r.size() + 1 != p) throw InputError("quantile regression: ragged covariate rows");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i])) throw InputError("quantile regression: non-finite response");
    x(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t k = 1; k < p; ++k) {
      if (!std::isfinite(rows[i][k - 1])) throw InputError("quantile regression: non-finite covariate");
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k - 1];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (n < p || static_cast<std::size_t>(qr.rank()) < p)
    throw InputError("quantile regression: design matrix is rank deficient");

  // Dual: max y'd  s.t.  X'd = 0,  alpha - 1 <= d_i <= alpha.
  // Columns 0..n-1 are d, n..n+p-1 are phase-one artificials.
  const double lo_d = alpha - 1.0, hi_d = alpha;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n + p));
  a.leftCols(static_cast<Eigen::Index>(n)) = x.transpose();

  // Warm start: least squares with its intercept moved to the alpha-quantile
  // of the residuals; each d_i starts at the bound that pilot fit implies.
  // Otherwise the simplex walks O(n) bound flips from the lower corner.
  Eigen::VectorXd pilot = qr.solve(Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n)));
  {
    Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n)) - x * pilot;
    std::vector<double> sorted(r.data(), r.data() + r.size());
    const auto k = static_cast<std::size_t>(alpha * static_cast<double>(n - 1));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    pilot[0] += sorted[k];
  }
  std::vector<double> init(n + p, 0.0);
  Eigen::VectorXd d0(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - x.row(static_cast<Eigen::Index>(i)).dot(pilot);
    init[i] = r > 0.0 ? hi_d : lo_d;
    d0[static_cast<Eigen::Index>(i)] = init[i];
  }
  const Eigen::VectorXd resid = -(x.transpose() * d0);
  a.rightCols(static_cast<Eigen::Index>(p)).setZero();
  for (std::size_t k = 0; k < p; ++k)
    a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n + k)) = resid[static_cast<Eigen::Index>(k)] >= 0.0 ? 1.0 : -1.0;

  std::vector<double> lo(n + p, 0.0), hi(n + p, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = lo_d;
    hi[i] = hi_d;
  }
  BoundedSimplex lp(a, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), lo, hi);
  std::vector<std::size_t> basis(p);
  std::iota(basis.begin(), basis.end(), n);
  lp.start(basis, init);

  std::vector<double> cost1(n + p, 0.0);
  for (std::size_t k = 0; k < p; ++k) cost1[n + k] = 1.0;
  std::vector<bool> frozen(n + p, false);
  if (!lp.optimize(cost1, frozen)) throw NumericalError("quantile regression: phase one did not terminate");
  double infeas = 0.0;
  for (std::size_t k = 0; k < p; ++k) infeas += lp.x()[n + k];
  const double scale = 1.0 + resid.cwiseAbs().sum();
  if (infeas > 1e-8 * scale) throw NumericalError("quantile regression: dual program infeasible");

  for (std::size_t k = 0; k < p; ++k) frozen[n + k] = true;
  for (std::size_t k = 0; k < p; ++k)
    if (lp.is_basic(n + k) && !lp.pivot_out(n + k, frozen))
      throw InputError("quantile regression: design matrix is rank deficient");

  std::vector<double> cost2(n + p, 0.0);
  for (std::size_t i = 0; i < n; ++i) cost2[i] = -y[i];
  if (!lp.optimize(cost2, frozen)) throw NumericalError("quantile regression: simplex did not terminate");

  // Interpolated observations: x_j'b = y_j for every basic j.
  Eigen::MatrixXd bm(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::VectorXd yb(static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < p; ++r) {
    const std::size_t j = lp.basis()[r];
    bm.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(j));
    yb[static_cast<Eigen::Index>(r)] = y[j];
  }
  const Eigen::VectorXd b = bm.partialPivLu().solve(yb);

  QuantileRegressionFit fit;
  fit.alpha = alpha;
  fit.coefficients.assign(b.data(), b.data() + b.size());
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t k = 0; k < p; ++k)
      pred += b[static_cast<Eigen::Index>(k)] * x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    fit.objective += pinball_loss(y[i] - pred, alpha);
  }
  return fit;
}

std::vector<double> default_quantile_levels() {
  std::vector<double> out;
  for (int i = 0; i <= 6; ++i) out.push_back(0.80 + 0.025 * i);
  return out;
}

std::vector<QuantileScanRow> quantile_grid_scan(std::span<const double> y,
                                                const std::vector<std::vector<double>>& rows,
                                                std::span<const double> levels) {
  if (levels.empty()) throw InputError("quantile scan: no levels");
  std::vector<QuantileScanRow> out;
  for (double alpha : levels) {
    QuantileScanRow row;
    row.alpha = alpha;
    row.sigma = row.xi = row.se_xi = kNaN;
    const QuantileRegressionFit fit = quantile_regression(y, rows, alpha);
    row.coefficients = fit.coefficients;
    std::vector<double> excess;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double e = y[i] - fit.predict(rows[i]);
      if (e > 0.0) excess.push_back(e);
    }
    row.n_exceed = excess.size();
    if (excess.size() < kMinScanExceedances) add_flag(row.flag, "few_exceedances");
    try {
      const GpdFit g = gpd_mle(excess, 0.0);
      row.sigma = g.sigma;
      row.xi = g.xi;
      row.se_xi = g.covariance[1][1] >= 0.0 ? std::sqrt(g.covariance[1][1]) : kNaN;
    } catch (const std::exception&) {
      add_flag(row.flag, "mle_failed");
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::pair<std::size_t, std::size_t> stable_window(std::span<const QuantileScanRow> rows, double tolerance) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::pair<std::size_t, std::size_t> best{npos, npos};
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].flag.empty() || !std::isfinite(rows[i].xi)) continue;
    double lo = rows[i].xi, hi = rows[i].xi;
    std::size_t j = i;
    while (j + 1 < rows.size() && rows[j + 1].flag.empty() && std::isfinite(rows[j + 1].xi)) {
      const double nlo = std::min(lo, rows[j + 1].xi), nhi = std::max(hi, rows[j + 1].xi);
      if (nhi - nlo > tolerance) break;
      lo = nlo;
      hi = nhi;
      ++j;
    }
    if (j - i + 1 > best_len) {
      best_len = j - i + 1;
      best = {i, j};
    }
  }
  return best;
}

}  // namespace hpot
