#pragma once

// Classical threshold choices: mean residual life and parameter-stability
// scans over a threshold grid, and linear quantile regression with a scan
// over quantile levels.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hpot {

// One grid point. Fields a scan does not compute are NaN; `flag` is empty for
// a usable row, otherwise a ';'-separated list of reasons.
struct ScanRow {
  double threshold = 0.0;
  std::size_t n_exceed = 0;
  double mean_excess = 0.0;
  double me_lo = 0.0;
  double me_hi = 0.0;
  double sigma = 0.0;
  double xi = 0.0;
  double sigma_star = 0.0;  // sigma - xi * threshold
  double se_sigma_star = 0.0;
  double se_xi = 0.0;
  std::string flag;
};

inline constexpr std::size_t kDefaultGridPoints = 40;

// Equally spaced between the 50% and 98% empirical quantiles.
std::vector<double> default_grid(std::span<const double> data, std::size_t points = kDefaultGridPoints);

// Mean of (x - u) over x > u with a mean +/- 1.96 sd / sqrt(n) band. Fewer
// than 5 exceedances, or u >= max(data), flags the row.
std::vector<ScanRow> mean_residual_life(std::span<const double> data, std::span<const double> grid);

// gpd_mle above each threshold, with delta-method standard errors for the
// modified scale. A failed fit flags the row.
std::vector<ScanRow> threshold_stability(std::span<const double> data, std::span<const double> grid);

// Both scans on the same grid, merged row by row.
std::vector<ScanRow> threshold_scan(std::span<const double> data, std::span<const double> grid);

double pinball_loss(double residual, double alpha);

struct QuantileRegressionFit {
  double alpha = 0.5;
  std::vector<double> coefficients;  // intercept first, then one per covariate column
  double objective = 0.0;            // sum of pinball losses

  double predict(std::span<const double> row) const;
};

// Minimizes the summed pinball loss exactly. `rows` holds the covariates of
// each observation (an intercept is added). Solved as the bounded dual linear
// program by a simplex method; the coefficients come from the optimal basis.
QuantileRegressionFit quantile_regression(std::span<const double> y, const std::vector<std::vector<double>>& rows,
                                          double alpha);

struct QuantileScanRow {
  double alpha = 0.0;
  std::vector<double> coefficients;
  std::size_t n_exceed = 0;
  double sigma = 0.0;
  double xi = 0.0;
  double se_xi = 0.0;
  std::string flag;
};

// 0.80, 0.825, ..., 0.95.
std::vector<double> default_quantile_levels();

inline constexpr std::size_t kMinScanExceedances = 30;

// For each level: regress the threshold surface, take y - prediction over the
// observations above it and fit a GPD to those excesses.
std::vector<QuantileScanRow> quantile_grid_scan(std::span<const double> y,
                                                const std::vector<std::vector<double>>& rows,
                                                std::span<const double> levels);

// Longest run of consecutive unflagged levels whose xi estimates span at most
// `tolerance`; returns index bounds [first, last], or (npos, npos) if none.
std::pair<std::size_t, std::size_t> stable_window(std::span<const QuantileScanRow> rows, double tolerance = 0.1);

}  // namespace hpot
