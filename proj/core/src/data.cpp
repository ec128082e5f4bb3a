#include "spirit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spirit/error.hpp"
#include "spirit/rng.hpp"

namespace spirit {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '"')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '"' || field.back() == '\r')) field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
long long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<long long>(era) * 146097 + static_cast<long long>(doe) - 719468;
}

// Accepts plain numbers and ISO-like "YYYY-MM-DD[ HH:MM[:SS]]" / "YYYY-MM-DDTHH:MM[:SS]".
bool parse_timestamp(std::string_view s, double& out) {
  if (parse_double(s, out)) return std::isfinite(out);
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0, mo = 0, d = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) || !parse_int(s.substr(8, 2), d)) return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return false;
  double seconds = static_cast<double>(days_from_civil(y, mo, d)) * 86400.0;
  std::string_view rest = s.substr(10);
  if (!rest.empty()) {
    if (rest.front() != ' ' && rest.front() != 'T') return false;
    rest.remove_prefix(1);
    int hh = 0, mm = 0, ss = 0;
    if (rest.size() < 5 || rest[2] != ':') return false;
    if (!parse_int(rest.substr(0, 2), hh) || !parse_int(rest.substr(3, 2), mm)) return false;
    if (rest.size() > 5) {
      if (rest.size() != 8 || rest[5] != ':' || !parse_int(rest.substr(6, 2), ss)) return false;
    }
    seconds += hh * 3600.0 + mm * 60.0 + ss;
  }
  out = seconds;
  return true;
}

}  // namespace

std::size_t WindowSet::missing_count() const {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < mask.size(); ++i) count += mask.data()[i] != 0;
  return count;
}

void MaskSpec::validate() const {
  if (!(p_miss > 0.0 && p_miss < 1.0)) throw InputError("invalid_mask_spec", "p_miss must lie in (0, 1)");
  if (!(anchor_fraction > 0.0 && anchor_fraction < 1.0))
    throw InputError("invalid_mask_spec", "anchor_fraction must lie in (0, 1)");
  if (!(bias_tolerance > 0.0)) throw InputError("invalid_mask_spec", "bias_tolerance must be positive");
}

RawSeries parse_csv(std::istream& in, std::span<const std::string> schema, const std::string& source) {
  RawSeries series;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InputError("parse_error", source + ": empty file");
  ++line_no;
  auto header = split_fields(line);
  if (header.size() < 2) throw InputError("parse_error", source + ":1: need a time column and at least one feature");
  series.time_column = std::string(header[0]);
  for (std::size_t c = 1; c < header.size(); ++c) series.feature_names.emplace_back(header[c]);

  if (!schema.empty()) {
    std::vector<std::string> full;
    full.push_back(series.time_column);
    full.insert(full.end(), series.feature_names.begin(), series.feature_names.end());
    const bool matches_features = std::equal(schema.begin(), schema.end(), series.feature_names.begin(),
                                             series.feature_names.end());
    const bool matches_full = std::equal(schema.begin(), schema.end(), full.begin(), full.end());
    if (!matches_features && !matches_full) throw InputError("schema_mismatch", source + ": header does not match expected columns");
  }

  const std::size_t width = series.feature_names.size();
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_fields(line);
    if (fields.size() != width + 1) {
      throw InputError("parse_error", source + ":" + std::to_string(line_no) + ": expected " +
                                          std::to_string(width + 1) + " fields, got " + std::to_string(fields.size()));
    }
    double key = 0.0;
    if (!parse_timestamp(fields[0], key)) {
      throw InputError("parse_error", source + ":" + std::to_string(line_no) + ": column 1 ('" +
                                          series.time_column + "'): unparseable timestamp '" + std::string(fields[0]) + "'");
    }
    if (!series.time_index.empty() && !(key > series.time_index.back())) {
      throw InputError("validation_error", source + ":" + std::to_string(line_no) + ": timestamps must be strictly increasing");
    }
    series.timestamps.emplace_back(fields[0]);
    series.time_index.push_back(key);
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c + 1], v) || !std::isfinite(v)) {
        throw InputError("parse_error", source + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 2) +
                                            " ('" + series.feature_names[c] + "'): not a finite number '" +
                                            std::string(fields[c + 1]) + "'");
      }
      values.push_back(v);
    }
  }
  if (series.timestamps.empty()) throw InputError("parse_error", source + ": no data rows");
  series.values = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(series.timestamps.size()),
                                        static_cast<Eigen::Index>(width));
  return series;
}

RawSeries load_csv(const std::filesystem::path& path, std::span<const std::string> schema) {
  std::ifstream in(path);
  if (!in) throw InputError("dataset_not_found", "cannot open " + path.string());
  return parse_csv(in, schema, path.string());
}

RowMatrix standardize(const RowMatrix& values, const NormStats& norm) {
  RowMatrix out(values.rows(), values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    out.col(c) = (values.col(c).array() - norm.mean[c]) / norm.std[c];
  }
  return out;
}

RowMatrix inverse_standardize(const RowMatrix& values, const NormStats& norm) {
  RowMatrix out(values.rows(), values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    out.col(c) = values.col(c).array() * norm.std[c] + norm.mean[c];
  }
  return out;
}

WindowSet standardize_and_window(const RawSeries& series, std::size_t patch_length, std::size_t stride) {
  if (patch_length == 0) throw InputError("invalid_config", "patch_length must be positive");
  if (stride == 0) stride = patch_length;
  const std::size_t rows = series.rows();
  const std::size_t d = series.features();
  if (rows < patch_length) {
    throw InputError("invalid_config", "series has " + std::to_string(rows) + " rows, fewer than patch_length " +
                                           std::to_string(patch_length));
  }

  NormStats norm;
  for (std::size_t c = 0; c < d; ++c) {
    const auto col = series.values.col(static_cast<Eigen::Index>(c));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(rows);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      throw InputError("degenerate_feature", "feature '" + series.feature_names[c] + "' has zero variance");
    }
    norm.mean.push_back(mean);
    norm.std.push_back(sd);
  }
  const RowMatrix z = standardize(series.values, norm);

  WindowSet ws;
  ws.n = (rows - patch_length) / stride + 1;
  ws.t = patch_length;
  ws.d = d;
  ws.norm = norm;
  ws.feature_names = series.feature_names;
  ws.time_column = series.time_column;
  const auto w = static_cast<Eigen::Index>(ws.width());
  ws.ideal.resize(static_cast<Eigen::Index>(ws.n), w);
  ws.raw.resize(static_cast<Eigen::Index>(ws.n), w);
  for (std::size_t i = 0; i < ws.n; ++i) {
    const std::size_t start = i * stride;
    for (std::size_t s = 0; s < patch_length; ++s) {
      ws.timestamps.push_back(series.timestamps[start + s]);
      for (std::size_t c = 0; c < d; ++c) {
        const auto col = static_cast<Eigen::Index>(WindowSet::column(s, c, d));
        ws.ideal(static_cast<Eigen::Index>(i), col) = z(static_cast<Eigen::Index>(start + s), static_cast<Eigen::Index>(c));
        ws.raw(static_cast<Eigen::Index>(i), col) =
            series.values(static_cast<Eigen::Index>(start + s), static_cast<Eigen::Index>(c));
      }
    }
  }
  ws.obs = ws.ideal;
  ws.mask = MaskMatrix::Zero(ws.ideal.rows(), ws.ideal.cols());
  return ws;
}

RowMatrix to_raw(const WindowSet& ws, const RowMatrix& standardized) {
  RowMatrix out(standardized.rows(), standardized.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      if (ws.mask(i, j) == 0) {
        out(i, j) = ws.raw(i, j);
      } else {
        const std::size_t f = static_cast<std::size_t>(j) % ws.d;
        out(i, j) = standardized(i, j) * ws.norm.std[f] + ws.norm.mean[f];
      }
    }
  }
  return out;
}

WindowSet with_mask(const WindowSet& ws, const MaskMatrix& mask) {
  if (mask.rows() != ws.ideal.rows() || mask.cols() != ws.ideal.cols()) throw InputError("shape_error", "mask shape mismatch");
  WindowSet out = ws;
  out.mask = mask;
  out.obs = ws.ideal;
  for (Eigen::Index k = 0; k < mask.size(); ++k) {
    if (mask.data()[k] > 1) throw InputError("shape_error", "mask entries must be 0 or 1");
    if (mask.data()[k]) out.obs.data()[k] = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

WindowSet simulate_mcar(const WindowSet& ws, const MaskSpec& spec) {
  spec.validate();
  if (ws.missing_count() != 0) throw InputError("invalid_input", "simulate_mcar expects an all-zero mask");
  if (ws.d < 2) throw InputError("invalid_input", "logistic masking needs at least two features");

  Rng rng(spec.seed, {0x6d61736bULL});
  const std::size_t n_anchor =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(spec.anchor_fraction * static_cast<double>(ws.d))), 1,
                              ws.d - 1);
  std::vector<std::size_t> features(ws.d);
  std::iota(features.begin(), features.end(), 0);
  std::shuffle(features.begin(), features.end(), rng);
  std::vector<std::size_t> anchors(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(n_anchor));
  std::vector<std::size_t> maskable(features.begin() + static_cast<std::ptrdiff_t>(n_anchor), features.end());
  std::sort(anchors.begin(), anchors.end());
  std::sort(maskable.begin(), maskable.end());

  // One coefficient row per maskable feature, one column per anchor.
  Eigen::MatrixXd coef(static_cast<Eigen::Index>(maskable.size()), static_cast<Eigen::Index>(anchors.size()));
  for (Eigen::Index r = 0; r < coef.rows(); ++r)
    for (Eigen::Index c = 0; c < coef.cols(); ++c) coef(r, c) = rng.normal();

  const std::size_t entries = ws.n * ws.t * maskable.size();
  std::vector<double> logits(entries);
  std::vector<double> uniforms(entries);
  std::vector<std::size_t> flat_index(entries);
  std::size_t k = 0;
  for (std::size_t i = 0; i < ws.n; ++i) {
    for (std::size_t s = 0; s < ws.t; ++s) {
      for (std::size_t m = 0; m < maskable.size(); ++m) {
        double logit = 0.0;
        for (std::size_t a = 0; a < anchors.size(); ++a) {
          logit += coef(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(a)) *
                   ws.ideal(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(WindowSet::column(s, anchors[a], ws.d)));
        }
        logits[k] = logit;
        uniforms[k] = rng.uniform();
        flat_index[k] = i * ws.width() + WindowSet::column(s, maskable[m], ws.d);
        ++k;
      }
    }
  }

  auto ratio_at = [&](double bias) {
    std::size_t hit = 0;
    for (std::size_t e = 0; e < entries; ++e) hit += uniforms[e] < 1.0 / (1.0 + std::exp(-(logits[e] + bias)));
    return static_cast<double>(hit) / static_cast<double>(entries);
  };

  double lo = -20.0, hi = 20.0;
  const double target = spec.p_miss;
  if (ratio_at(lo) > target + spec.bias_tolerance || ratio_at(hi) < target - spec.bias_tolerance) {
    throw InputError("mask_calibration", "cannot bracket target missing ratio in bias interval [-20, 20]");
  }
  double bias = 0.0;
  bool calibrated = false;
  for (int iter = 0; iter < 100; ++iter) {
    bias = 0.5 * (lo + hi);
    const double r = ratio_at(bias);
    if (std::abs(r - target) <= spec.bias_tolerance) {
      calibrated = true;
      break;
    }
    (r < target ? lo : hi) = bias;
  }
  if (!calibrated) throw InputError("mask_calibration", "bias bisection did not reach the requested tolerance in 100 iterations");

  MaskMatrix mask = MaskMatrix::Zero(ws.ideal.rows(), ws.ideal.cols());
  for (std::size_t e = 0; e < entries; ++e) {
    if (uniforms[e] < 1.0 / (1.0 + std::exp(-(logits[e] + bias)))) mask.data()[flat_index[e]] = 1;
  }
  WindowSet out = with_mask(ws, mask);
  out.anchor_features = anchors;
  return out;
}

double maskable_missing_ratio(const WindowSet& ws) {
  std::size_t masked = 0, total = 0;
  for (std::size_t i = 0; i < ws.n; ++i) {
    for (std::size_t s = 0; s < ws.t; ++s) {
      for (std::size_t f = 0; f < ws.d; ++f) {
        if (std::find(ws.anchor_features.begin(), ws.anchor_features.end(), f) != ws.anchor_features.end()) continue;
        ++total;
        masked += ws.mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(WindowSet::column(s, f, ws.d)));
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(masked) / static_cast<double>(total);
}

void write_mask_csv(const WindowSet& ws, std::ostream& out, MaskFormat format) {
  if (format == MaskFormat::Triples) {
    out << "window,step,feature\n";
    for (std::size_t i = 0; i < ws.n; ++i)
      for (std::size_t s = 0; s < ws.t; ++s)
        for (std::size_t f = 0; f < ws.d; ++f)
          if (ws.mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(WindowSet::column(s, f, ws.d))))
            out << i << ',' << s << ',' << f << '\n';
    return;
  }
  out << "window,step";
  for (const auto& name : ws.feature_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < ws.n; ++i) {
    for (std::size_t s = 0; s < ws.t; ++s) {
      out << i << ',' << s;
      for (std::size_t f = 0; f < ws.d; ++f)
        out << ',' << int(ws.mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(WindowSet::column(s, f, ws.d))));
      out << '\n';
    }
  }
}

void write_imputed_csv(const WindowSet& ws, const RowMatrix& raw_values, std::ostream& out) {
  out << ws.time_column;
  for (const auto& name : ws.feature_names) out << ',' << name;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ws.n; ++i) {
    for (std::size_t s = 0; s < ws.t; ++s) {
      const std::size_t row = i * ws.t + s;
      out << (row < ws.timestamps.size() ? ws.timestamps[row] : std::to_string(row));
      for (std::size_t f = 0; f < ws.d; ++f) {
        const double v = raw_values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(WindowSet::column(s, f, ws.d)));
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
      }
      out << '\n';
    }
  }
}

void write_series_csv(const RawSeries& series, std::ostream& out) {
  out << series.time_column;
  for (const auto& name : series.feature_names) out << ',' << name;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < series.rows(); ++r) {
    out << (r < series.timestamps.size() ? series.timestamps[r] : std::to_string(r));
    for (std::size_t f = 0; f < series.features(); ++f) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), series.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace spirit
