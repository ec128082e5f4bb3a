#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "spirit/data.hpp"
#include "spirit/imputer.hpp"

namespace spirit {

/// Samplers compared on the 2-D conditional Gaussian toy.
enum class ToySampler { Deterministic, Wiener, VpDrift };
std::string_view to_string(ToySampler s);

/// Bivariate Gaussian with x1 observed and x2 missing.
struct GaussianToySpec {
  Eigen::Vector2d mean{0.0, 0.0};
  double correlation = 0.953939201416946;  // conditional std 0.3 at unit marginals
  double observed_x1 = 1.0;
  std::size_t particles = 200;
  std::size_t steps = 500;
  double eta = 0.002;
  double init_std = 1.0;  // spread of the initial x2 draws around the mean

  double conditional_mode() const { return mean(1) + correlation * (observed_x1 - mean(0)); }
  double conditional_std() const { return std::sqrt(1.0 - correlation * correlation); }
};

struct ToyResult {
  ToySampler sampler = ToySampler::Deterministic;
  RowMatrix particles;  // [particles x 2]
  Eigen::VectorXd weights;
  Eigen::Vector2d median;
  Eigen::Vector2d mode;
  double median_to_mode = 0.0;
  double spread_std = 0.0;  // empirical std of the imputed coordinate
  std::vector<double> energy;  // weighted mean squared score norm per step
};

/// Runs the imputation loop with the exact conditional score. Deterministic is
/// the SPIRIT flow (teleport on, no noise), Wiener adds sqrt(2 eta) noise with
/// uniform weights, VpDrift additionally applies the -x drift of the VP SDE.
ToyResult run_gaussian_toy(ToySampler sampler, std::uint64_t seed, const GaussianToySpec& spec = {},
                           bool weight_scaling = false);

}  // namespace spirit
