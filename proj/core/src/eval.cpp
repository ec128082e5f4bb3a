#include "spirit/eval.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "spirit/error.hpp"

namespace spirit {

MetricsReport masked_mae_mse(const RowMatrix& ideal, const RowMatrix& imputed, const MaskMatrix& mask, std::size_t features,
                             const NormStats* norm) {
  if (ideal.rows() != imputed.rows() || ideal.cols() != imputed.cols() || ideal.rows() != mask.rows() ||
      ideal.cols() != mask.cols()) {
    throw InputError("shape_error", "ideal, imputed and mask must share one shape");
  }
  if (features == 0 || static_cast<std::size_t>(ideal.cols()) % features != 0)
    throw InputError("shape_error", "window width is not a multiple of the feature count");
  if (norm && norm->std.size() != features) throw InputError("shape_error", "norm stats do not match feature count");

  MetricsReport rep;
  rep.per_feature.assign(features, {});
  for (Eigen::Index i = 0; i < ideal.rows(); ++i) {
    for (Eigen::Index c = 0; c < ideal.cols(); ++c) {
      if (!mask(i, c)) continue;
      const std::size_t f = static_cast<std::size_t>(c) % features;
      const double e = imputed(i, c) - ideal(i, c);
      const double scale = norm ? norm->std[f] : 1.0;
      auto& pf = rep.per_feature[f];
      pf.mae += std::abs(e);
      pf.mse += e * e;
      pf.mae_raw += std::abs(e) * scale;
      pf.mse_raw += e * e * scale * scale;
      ++pf.n_evaluated;
    }
  }
  for (auto& pf : rep.per_feature) {
    rep.mae += pf.mae;
    rep.mse += pf.mse;
    rep.mae_raw += pf.mae_raw;
    rep.mse_raw += pf.mse_raw;
    rep.n_evaluated += pf.n_evaluated;
    if (pf.n_evaluated > 0) {
      const auto k = static_cast<double>(pf.n_evaluated);
      pf.mae /= k;
      pf.mse /= k;
      pf.mae_raw /= k;
      pf.mse_raw /= k;
    }
  }
  if (rep.n_evaluated == 0) throw InputError("empty_evaluation", "mask has no missing entries to evaluate");
  const auto k = static_cast<double>(rep.n_evaluated);
  rep.mae /= k;
  rep.mse /= k;
  rep.mae_raw /= k;
  rep.mse_raw /= k;
  return rep;
}

MetricsReport masked_mae_mse(const WindowSet& ws, const RowMatrix& imputed) {
  return masked_mae_mse(ws.ideal, imputed, ws.mask, ws.d, ws.norm.std.empty() ? nullptr : &ws.norm);
}

std::vector<double> per_window_mae(const RowMatrix& ideal, const RowMatrix& imputed, const MaskMatrix& mask) {
  std::vector<double> out(static_cast<std::size_t>(ideal.rows()), 0.0);
  for (Eigen::Index i = 0; i < ideal.rows(); ++i) {
    double acc = 0.0;
    std::size_t k = 0;
    for (Eigen::Index c = 0; c < ideal.cols(); ++c) {
      if (!mask(i, c)) continue;
      acc += std::abs(imputed(i, c) - ideal(i, c));
      ++k;
    }
    out[static_cast<std::size_t>(i)] = k ? acc / static_cast<double>(k) : 0.0;
  }
  return out;
}

PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("shape_error", "paired samples must have equal length");
  if (a.size() < 2) throw InputError("degenerate_test", "paired t-test needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double var = ss / (n - 1.0);
  // Differences that are constant up to rounding carry no spread to test against.
  const double scale = std::max(std::abs(mean), 1e-300);
  if (!(var > 1e-24 * scale * scale)) throw InputError("degenerate_test", "paired differences have zero variance");

  PairedTestResult res;
  res.mean_difference = mean;
  res.degrees_of_freedom = n - 1.0;
  res.t_statistic = mean / std::sqrt(var / n);
  const double df = res.degrees_of_freedom;
  const double t2 = res.t_statistic * res.t_statistic;
  res.p_value = std::clamp(boost::math::ibeta(0.5 * df, 0.5, df / (df + t2)), 0.0, 1.0);
  return res;
}

ConvergenceSummary convergence_report(std::span<const double> trace, std::size_t window, std::size_t horizon, double rel_tol) {
  if (trace.size() < 20) throw InputError("invalid_input", "convergence report needs at least 20 iterations");
  if (window == 0 || horizon == 0) throw InputError("invalid_input", "window and horizon must be positive");
  ConvergenceSummary out;
  const std::size_t n = trace.size();
  out.smoothed.resize(n);
  double running = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    running += trace[k];
    if (k >= window) running -= trace[k - window];
    out.smoothed[k] = running / static_cast<double>(std::min(k + 1, window));
  }
  const auto& s = out.smoothed;
  double level = 0.0;
  for (double v : s) level = std::max(level, std::abs(v));
  const double thresh = rel_tol * std::max(level, 1e-300);
  for (std::size_t k = 0; k + horizon < n; ++k) {
    if (std::abs(s[k + horizon] - s[k]) < thresh) {
      out.plateau_detected = true;
      out.plateau_iteration = k;
      break;
    }
  }
  out.final_over_initial = s.front() != 0.0 ? s.back() / s.front() : (s.back() == 0.0 ? 1.0 : INFINITY);

  const std::size_t start = n - std::max<std::size_t>(n / 4, 2);
  const auto m = static_cast<double>(n - start);
  double mx = 0.0, my = 0.0;
  for (std::size_t k = start; k < n; ++k) {
    mx += static_cast<double>(k);
    my += s[k];
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = start; k < n; ++k) {
    sxy += (static_cast<double>(k) - mx) * (s[k] - my);
    sxx += (static_cast<double>(k) - mx) * (static_cast<double>(k) - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  out.last_quartile_slope = my != 0.0 ? slope * static_cast<double>(horizon) / std::abs(my) : 0.0;
  return out;
}

}  // namespace spirit
