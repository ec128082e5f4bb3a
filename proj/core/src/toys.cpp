#include "spirit/toys.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spirit/error.hpp"

namespace spirit {

namespace {

// Score of the VP-SDE drift composition: s(x) - x.
class VpDriftScore final : public ScoreField {
 public:
  explicit VpDriftScore(const ScoreField& base) : base_(base) {}
  RowMatrix operator()(const RowMatrix& x) const override { return base_(x) - x; }

 private:
  const ScoreField& base_;
};

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double hi = v[mid];
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

std::string_view to_string(ToySampler s) {
  switch (s) {
    case ToySampler::Deterministic: return "deterministic";
    case ToySampler::Wiener: return "wiener";
    case ToySampler::VpDrift: return "vp_drift";
  }
  return "deterministic";
}

ToyResult run_gaussian_toy(ToySampler sampler, std::uint64_t seed, const GaussianToySpec& spec, bool weight_scaling) {
  if (spec.particles < 2 || spec.steps < 1 || !(spec.eta > 0.0) || !(std::abs(spec.correlation) < 1.0))
    throw InputError("invalid_config", "gaussian toy needs >= 2 particles, >= 1 step, eta > 0 and |rho| < 1");

  const auto n = static_cast<Eigen::Index>(spec.particles);
  WindowSet ws;
  ws.n = spec.particles;
  ws.t = 1;
  ws.d = 2;
  ws.feature_names = {"x1", "x2"};
  ws.ideal = RowMatrix::Zero(n, 2);
  ws.obs = RowMatrix::Zero(n, 2);
  ws.mask = MaskMatrix::Zero(n, 2);
  Rng init_rng(seed, {0x10});
  for (Eigen::Index i = 0; i < n; ++i) {
    ws.ideal(i, 0) = spec.observed_x1;
    ws.ideal(i, 1) = spec.conditional_mode();
    ws.obs(i, 0) = spec.observed_x1;
    ws.obs(i, 1) = std::numeric_limits<double>::quiet_NaN();
    ws.mask(i, 1) = 1;
  }

  ParticleEnsemble ens;
  ens.x_imp = ws.obs;
  for (Eigen::Index i = 0; i < n; ++i) ens.x_imp(i, 1) = spec.mean(1) + spec.init_std * init_rng.normal();
  ens.log_w = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));

  Eigen::Matrix2d cov;
  cov << 1.0, spec.correlation, spec.correlation, 1.0;
  const GaussianScore exact(spec.mean, cov);
  const VpDriftScore vp(exact);
  const ScoreField& field = sampler == ToySampler::VpDrift ? static_cast<const ScoreField&>(vp) : exact;

  SpiritConfig cfg;
  cfg.eta = spec.eta;
  cfg.weight_scaling = weight_scaling;
  cfg.variant = sampler == ToySampler::Deterministic ? Variant::Spirit : Variant::LangevinUniform;

  ToyResult res;
  res.sampler = sampler;
  Rng step_rng(seed, {0x20});
  res.energy.reserve(spec.steps);
  for (std::size_t k = 0; k < spec.steps; ++k) res.energy.push_back(spirit_step(field, ens, ws, cfg, step_rng));

  res.particles = ens.x_imp;
  res.weights = ens.weights();
  std::vector<double> x1(static_cast<std::size_t>(n)), x2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    x1[static_cast<std::size_t>(i)] = ens.x_imp(i, 0);
    x2[static_cast<std::size_t>(i)] = ens.x_imp(i, 1);
  }
  res.median = {median_of(x1), median_of(x2)};
  res.mode = {spec.observed_x1, spec.conditional_mode()};
  res.median_to_mode = (res.median - res.mode).norm();
  const double mean2 = ens.x_imp.col(1).mean();
  res.spread_std = std::sqrt((ens.x_imp.col(1).array() - mean2).square().sum() / static_cast<double>(n - 1));
  return res;
}

}  // namespace spirit
