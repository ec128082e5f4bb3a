#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spirit/data.hpp"

namespace spirit {

struct FeatureMetrics {
  double mae = 0.0;
  double mse = 0.0;
  double mae_raw = 0.0;
  double mse_raw = 0.0;
  std::size_t n_evaluated = 0;
};

/// Errors over held-out entries (mask = 1) only.
struct MetricsReport {
  double mae = 0.0;
  double mse = 0.0;
  double mae_raw = 0.0;
  double mse_raw = 0.0;
  std::size_t n_evaluated = 0;
  std::vector<FeatureMetrics> per_feature;
};

/// Standardized-scale metrics from `ideal` vs `imputed`; raw-scale metrics use
/// `norm` (per-feature std) when provided. Matrices follow the WindowSet layout
/// with `features` columns per step.
MetricsReport masked_mae_mse(const RowMatrix& ideal, const RowMatrix& imputed, const MaskMatrix& mask, std::size_t features,
                             const NormStats* norm = nullptr);
MetricsReport masked_mae_mse(const WindowSet& ws, const RowMatrix& imputed);

/// Mean absolute error per window over its masked entries; windows without
/// masked entries report 0.
std::vector<double> per_window_mae(const RowMatrix& ideal, const RowMatrix& imputed, const MaskMatrix& mask);

struct PairedTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  double mean_difference = 0.0;
};

/// Two-sided paired t-test on a - b.
PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct ConvergenceSummary {
  std::vector<double> smoothed;
  bool plateau_detected = false;
  std::size_t plateau_iteration = 0;
  double final_over_initial = 1.0;
  /// Least-squares slope of the smoothed last quartile, expressed as the change
  /// per `horizon` iterations relative to that quartile's mean level.
  double last_quartile_slope = 0.0;
};

/// Trailing moving average of width `window`; a plateau starts at the first k
/// with |s[k + horizon] - s[k]| < rel_tol * max|s|.
ConvergenceSummary convergence_report(std::span<const double> trace, std::size_t window = 10, std::size_t horizon = 20,
                                      double rel_tol = 0.01);

}  // namespace spirit
