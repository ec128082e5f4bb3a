#include "spirit/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "spirit/error.hpp"
#include "spirit/rng.hpp"

namespace spirit {

namespace {

// Inverse of days_from_civil (proleptic Gregorian).
void civil_from_days(long long z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe + era * 400) + (m <= 2 ? 1 : 0);
}

std::string hourly_stamp(std::size_t hour) {
  constexpr long long kStartDay = 16983;  // 2016-07-01
  int y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(kStartDay + static_cast<long long>(hour / 24), y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02zu:00:00", y, m, d, hour % 24);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (windows < 1 || patch_length < 1 || features < 1) throw InputError("invalid_config", "synthetic sizes must be positive");
  if (!(std::abs(latent_ar) < 1.0) || !(std::abs(noise_ar) < 1.0))
    throw InputError("invalid_config", "AR coefficients must lie in (-1, 1)");
  if (!(noise_std >= 0.0)) throw InputError("invalid_config", "noise_std must be nonnegative");
}

RawSeries generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t rows = spec.rows();
  const std::size_t d = spec.features;
  Rng coef_rng(spec.seed, {0x636f6566});
  Rng path_rng(spec.seed, {0x70617468});

  struct Feature {
    double daily_amp, daily_phase, weekly_amp, weekly_phase, loading, offset, scale;
  };
  std::vector<Feature> feats(d);
  for (auto& f : feats) {
    f.daily_amp = coef_rng.uniform(0.8, 1.5);
    f.daily_phase = coef_rng.uniform(0.0, 2.0 * std::numbers::pi);
    f.weekly_amp = coef_rng.uniform(0.3, 0.8);
    f.weekly_phase = coef_rng.uniform(0.0, 2.0 * std::numbers::pi);
    f.loading = coef_rng.uniform(0.5, 1.0) * (coef_rng.uniform() < 0.5 ? -1.0 : 1.0);
    f.offset = coef_rng.uniform(-20.0, 40.0);
    f.scale = coef_rng.uniform(0.5, 8.0);
  }

  RawSeries s;
  s.time_column = "date";
  for (std::size_t f = 0; f < d; ++f) s.feature_names.push_back("x" + std::to_string(f));
  s.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  s.timestamps.reserve(rows);
  s.time_index.reserve(rows);

  const double latent_sd = std::sqrt(1.0 - spec.latent_ar * spec.latent_ar);
  const double noise_sd = spec.noise_std * std::sqrt(1.0 - spec.noise_ar * spec.noise_ar);
  double latent = path_rng.normal();
  std::vector<double> noise(d);
  for (auto& e : noise) e = spec.noise_std * path_rng.normal();

  for (std::size_t r = 0; r < rows; ++r) {
    if (r > 0) {
      latent = spec.latent_ar * latent + latent_sd * path_rng.normal();
      for (auto& e : noise) e = spec.noise_ar * e + noise_sd * path_rng.normal();
    }
    const double t = static_cast<double>(r);
    for (std::size_t f = 0; f < d; ++f) {
      const Feature& c = feats[f];
      const double v = c.daily_amp * std::sin(2.0 * std::numbers::pi * t / 24.0 + c.daily_phase) +
                       c.weekly_amp * std::sin(2.0 * std::numbers::pi * t / 168.0 + c.weekly_phase) + c.loading * latent +
                       noise[f];
      s.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) = c.offset + c.scale * v;
    }
    s.timestamps.push_back(hourly_stamp(r));
    s.time_index.push_back(t * 3600.0);
  }
  return s;
}

}  // namespace spirit
