#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spirit {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fully observed multivariate series as read from disk.
struct RawSeries {
  std::string time_column = "date";
  std::vector<std::string> timestamps;  // original labels, echoed on export
  std::vector<double> time_index;       // numeric key, strictly increasing
  RowMatrix values;                     // [rows x D]
  std::vector<std::string> feature_names;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(values.cols()); }
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Windows of a standardized series. Tensors of shape [N x T x D] are stored as
/// row-major [N x (T*D)] matrices; entry (n, t, d) lives at (n, t*D + d).
///
/// Mask convention: 1 means missing. `obs` holds NaN at missing entries and is
/// bit-identical to `ideal` everywhere else.
struct WindowSet {
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t d = 0;
  RowMatrix ideal;
  RowMatrix obs;
  MaskMatrix mask;
  RowMatrix raw;  // unstandardized ground truth, used for exact round-trips
  NormStats norm;
  std::vector<std::size_t> anchor_features;
  std::vector<std::string> feature_names;
  std::string time_column = "date";
  std::vector<std::string> timestamps;  // N*T labels of the rows kept

  std::size_t patch_length() const { return t; }
  std::size_t width() const { return t * d; }
  static std::size_t column(std::size_t step, std::size_t feature, std::size_t features) {
    return step * features + feature;
  }
  std::size_t missing_count() const;
};

struct MaskSpec {
  double p_miss = 0.3;
  double anchor_fraction = 0.3;
  std::uint64_t seed = 0;
  double bias_tolerance = 0.005;

  void validate() const;
  bool operator==(const MaskSpec&) const = default;
};

enum class MaskFormat { Triples, Dense };

RawSeries parse_csv(std::istream& in, std::span<const std::string> schema = {},
                    const std::string& source = "<stream>");
RawSeries load_csv(const std::filesystem::path& path, std::span<const std::string> schema = {});

/// Z-scores each feature with full-series statistics and cuts non-overlapping
/// windows of `patch_length` rows. Leftover rows are dropped. A nonzero
/// `stride` smaller than the patch length produces overlapping windows.
WindowSet standardize_and_window(const RawSeries& series, std::size_t patch_length, std::size_t stride = 0);

RowMatrix standardize(const RowMatrix& values, const NormStats& norm);
RowMatrix inverse_standardize(const RowMatrix& values, const NormStats& norm);

/// Converts standardized windows back to raw units. Entries with mask = 0 are
/// copied from `ws.raw`, so observed values round-trip exactly.
RowMatrix to_raw(const WindowSet& ws, const RowMatrix& standardized);

/// Logistic missingness: a random subset of anchor features stays observed,
/// the remaining entries are masked with probability sigmoid(w . x_anchor + b)
/// where b is calibrated by bisection to hit `spec.p_miss` over maskable entries.
WindowSet simulate_mcar(const WindowSet& ws, const MaskSpec& spec);

/// Fraction of masked entries among non-anchor features.
double maskable_missing_ratio(const WindowSet& ws);

/// Replaces the mask (and obs) of `ws` by an explicit mask.
WindowSet with_mask(const WindowSet& ws, const MaskMatrix& mask);

void write_mask_csv(const WindowSet& ws, std::ostream& out, MaskFormat format);
void write_imputed_csv(const WindowSet& ws, const RowMatrix& raw_values, std::ostream& out);
/// Writes a series in the format read by parse_csv (shortest round-trip decimals).
void write_series_csv(const RawSeries& series, std::ostream& out);

}  // namespace spirit
