#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "spirit/data.hpp"
#include "spirit/rng.hpp"
#include "spirit/scorenet.hpp"

namespace spirit {

enum class InitMode { Mean, Zero, MeanPlusNoise };

/// `mean_imputation` is a non-iterative baseline: the initial per-feature mean fill.
enum class Variant { Spirit, SpiritDissipative, W2Uniform, LangevinUniform, MeanImputation };

std::string_view to_string(InitMode m);
std::string_view to_string(Variant v);
InitMode parse_init_mode(std::string_view s);
Variant parse_variant(std::string_view s);

struct SpiritConfig {
  double eta = 0.002;
  std::size_t outer_rounds = 5;
  std::size_t imp_iters = 100;
  bool weight_scaling = true;  // location step scaled by w_i * N
  InitMode init_mode = InitMode::Mean;
  Variant variant = Variant::Spirit;
  bool teleport_sign_flip = false;  // investigation only
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SpiritConfig&) const = default;
  bool frozen_weights() const { return variant == Variant::W2Uniform || variant == Variant::LangevinUniform; }
  bool injects_noise() const { return variant == Variant::SpiritDissipative || variant == Variant::LangevinUniform; }
};

/// A score oracle evaluated row-wise on [N x width] particles.
class ScoreField {
 public:
  virtual ~ScoreField() = default;
  virtual RowMatrix operator()(const RowMatrix& x) const = 0;
};

class NetworkScore final : public ScoreField {
 public:
  explicit NetworkScore(const ScoreNetwork& net) : net_(&net) {}
  RowMatrix operator()(const RowMatrix& x) const override;

 private:
  const ScoreNetwork* net_;
};

/// Exact score of N(mean, cov): -cov^{-1} (x - mean).
class GaussianScore final : public ScoreField {
 public:
  GaussianScore(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);
  RowMatrix operator()(const RowMatrix& x) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
};

/// Weighted particles q' = sum_i w_i delta_{x_i}, one particle per window.
struct ParticleEnsemble {
  RowMatrix x_imp;       // [N x T*D]
  Eigen::VectorXd log_w; // [N]
  std::size_t iteration = 0;

  Eigen::VectorXd weights() const { return log_w.array().exp(); }
};

struct TraceRecord {
  std::size_t round = 0;
  std::size_t iter = 0;
  double dsm_loss = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  double mean_score_norm = 0.0;  // weighted mean of squared score norms over missing coordinates
  double weight_entropy = 0.0;
};

struct EnergyTrace {
  std::vector<TraceRecord> records;
  std::vector<double> epoch_losses;  // DSM training losses, all rounds concatenated
};

ParticleEnsemble init_imputation(const WindowSet& ws, const SpiritConfig& cfg, Rng& rng,
                                 std::vector<std::string>* warnings = nullptr);

/// Scores restricted to missing coordinates (zero where mask = 0).
RowMatrix transport_direction(const ScoreField& score, const ParticleEnsemble& ens, const MaskMatrix& mask);

/// Squared norm of each row over its masked coordinates.
Eigen::VectorXd masked_squared_norms(const RowMatrix& scores, const MaskMatrix& mask);

/// T_w = -2 n_i + 2 sum_j w_j n_j with n_i the masked squared score norm.
Eigen::VectorXd teleport_direction(const ScoreField& score, const ParticleEnsemble& ens, const MaskMatrix& mask);
Eigen::VectorXd teleport_direction(const Eigen::VectorXd& squared_norms, const Eigen::VectorXd& log_w);

/// log_w = log_w_hat - logsumexp(log_w_hat).
Eigen::VectorXd normalize_weights(const Eigen::VectorXd& log_w_hat);

double weight_entropy(const Eigen::VectorXd& log_w);

/// One recursive imputation iteration. Handles every iterative variant:
/// teleport (unless weights are frozen), location step on missing coordinates,
/// optional sqrt(2 eta) Wiener noise, then clamping of observed entries.
/// Returns the weighted mean squared score norm at the pre-step particles.
double spirit_step(const ScoreField& score, ParticleEnsemble& ens, const WindowSet& ws, const SpiritConfig& cfg, Rng& rng);

struct SpiritRun {
  RowMatrix imputed;      // standardized units
  RowMatrix imputed_raw;  // raw units, observed entries copied exactly
  EnergyTrace trace;
  ScoreNetwork net;
  ParticleEnsemble ensemble;
};

using TraceSink = std::function<void(const TraceRecord&)>;

/// Alternates score learning on the current imputations with cfg.imp_iters
/// recursive imputation steps, for cfg.outer_rounds rounds.
SpiritRun run_spirit(const WindowSet& ws, const SpiritConfig& cfg, const DsmConfig& dsm, const TraceSink& sink = {});

/// Ablations and baselines; dispatches on cfg.variant (Spirit delegates to run_spirit).
SpiritRun run_variant(const WindowSet& ws, const SpiritConfig& cfg, const DsmConfig& dsm, const TraceSink& sink = {});

}  // namespace spirit
