#pragma once

#include <cstdint>

#include "spirit/data.hpp"

namespace spirit {

/// Offline benchmark: daily and weekly seasonality, a shared AR(1) latent
/// factor and per-feature AR(1) noise, sampled hourly.
struct SyntheticSpec {
  std::size_t windows = 500;
  std::size_t patch_length = 24;
  std::size_t features = 4;
  std::uint64_t seed = 2024;
  double latent_ar = 0.98;
  double noise_ar = 0.7;
  double noise_std = 0.2;

  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
  std::size_t rows() const { return windows * patch_length; }
};

RawSeries generate_synthetic(const SyntheticSpec& spec);

}  // namespace spirit
