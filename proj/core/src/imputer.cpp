#include "spirit/imputer.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Cholesky>

#include "spirit/error.hpp"
#include "spirit/eval.hpp"

namespace spirit {

namespace {

constexpr std::array<std::pair<InitMode, std::string_view>, 3> kInitNames{{
    {InitMode::Mean, "mean"}, {InitMode::Zero, "zero"}, {InitMode::MeanPlusNoise, "mean_plus_noise"}}};

constexpr std::array<std::pair<Variant, std::string_view>, 5> kVariantNames{{{Variant::Spirit, "spirit"},
                                                                             {Variant::SpiritDissipative, "spirit_dissipative"},
                                                                             {Variant::W2Uniform, "w2_uniform"},
                                                                             {Variant::LangevinUniform, "langevin_uniform"},
                                                                             {Variant::MeanImputation, "mean_imputation"}}};

// Stream tags for the per-run generators.
enum : std::uint64_t { kStreamInit = 1, kStreamNet = 2, kStreamTrain = 3, kStreamEval = 4, kStreamStep = 5 };

void clamp_observed(RowMatrix& x, const WindowSet& ws) {
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (!ws.mask(i, c)) x(i, c) = ws.obs(i, c);
}

void check_scores(const RowMatrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    if (!s.row(i).allFinite())
      throw NumericError("numeric_overflow", "non-finite score for particle " + std::to_string(i));
}

}  // namespace

std::string_view to_string(InitMode m) {
  for (const auto& [k, v] : kInitNames)
    if (k == m) return v;
  return "mean";
}

std::string_view to_string(Variant v) {
  for (const auto& [k, name] : kVariantNames)
    if (k == v) return name;
  return "spirit";
}

InitMode parse_init_mode(std::string_view s) {
  for (const auto& [k, v] : kInitNames)
    if (v == s) return k;
  throw InputError("invalid_config", "unknown init_mode '" + std::string(s) + "'");
}

Variant parse_variant(std::string_view s) {
  for (const auto& [k, v] : kVariantNames)
    if (v == s) return k;
  throw InputError("invalid_config", "unknown variant '" + std::string(s) + "'");
}

void SpiritConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InputError("invalid_config", "eta must be positive");
  if (outer_rounds < 1) throw InputError("invalid_config", "outer_rounds must be at least 1");
  if (imp_iters < 1) throw InputError("invalid_config", "imp_iters must be at least 1");
}

RowMatrix NetworkScore::operator()(const RowMatrix& x) const { return net_->forward(x); }

GaussianScore::GaussianScore(Eigen::VectorXd mean, const Eigen::MatrixXd& cov) : mean_(std::move(mean)) {
  if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) throw InputError("shape_error", "covariance/mean mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw InputError("invalid_input", "covariance is not positive definite");
  precision_ = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

RowMatrix GaussianScore::operator()(const RowMatrix& x) const {
  if (x.cols() != mean_.size()) throw InputError("shape_error", "particle width does not match the Gaussian");
  RowMatrix centered = x.rowwise() - mean_.transpose();
  return -(centered * precision_);
}

ParticleEnsemble init_imputation(const WindowSet& ws, const SpiritConfig& cfg, Rng& rng, std::vector<std::string>* warnings) {
  const auto width = static_cast<Eigen::Index>(ws.width());
  if (ws.obs.rows() != static_cast<Eigen::Index>(ws.n) || ws.obs.cols() != width || ws.mask.rows() != ws.obs.rows() ||
      ws.mask.cols() != width) {
    throw InputError("shape_error", "window set has inconsistent obs/mask shapes");
  }
  std::vector<double> fill(ws.d, 0.0);
  if (cfg.init_mode != InitMode::Zero) {
    std::vector<double> sum(ws.d, 0.0);
    std::vector<std::size_t> cnt(ws.d, 0);
    for (Eigen::Index i = 0; i < ws.obs.rows(); ++i)
      for (Eigen::Index c = 0; c < width; ++c)
        if (!ws.mask(i, c)) {
          const auto f = static_cast<std::size_t>(c) % ws.d;
          sum[f] += ws.obs(i, c);
          ++cnt[f];
        }
    for (std::size_t f = 0; f < ws.d; ++f) {
      if (cnt[f] > 0) {
        fill[f] = sum[f] / static_cast<double>(cnt[f]);
      } else if (warnings) {
        const std::string name = f < ws.feature_names.size() ? ws.feature_names[f] : std::to_string(f);
        warnings->push_back("feature '" + name + "' is fully missing; filled with zero");
      }
    }
  }

  ParticleEnsemble ens;
  ens.x_imp = ws.obs;
  for (Eigen::Index i = 0; i < ens.x_imp.rows(); ++i)
    for (Eigen::Index c = 0; c < width; ++c) {
      if (!ws.mask(i, c)) continue;
      double v = fill[static_cast<std::size_t>(c) % ws.d];
      if (cfg.init_mode == InitMode::MeanPlusNoise) v += rng.normal(0.0, 0.1);
      ens.x_imp(i, c) = v;
    }
  const double n = static_cast<double>(std::max<std::size_t>(ws.n, 1));
  ens.log_w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ws.n), -std::log(n));
  return ens;
}

RowMatrix transport_direction(const ScoreField& score, const ParticleEnsemble& ens, const MaskMatrix& mask) {
  RowMatrix s = score(ens.x_imp);
  check_scores(s);
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index c = 0; c < s.cols(); ++c)
      if (!mask(i, c)) s(i, c) = 0.0;
  return s;
}

Eigen::VectorXd masked_squared_norms(const RowMatrix& scores, const MaskMatrix& mask) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    for (Eigen::Index c = 0; c < scores.cols(); ++c)
      if (mask(i, c)) out(i) += scores(i, c) * scores(i, c);
  return out;
}

Eigen::VectorXd teleport_direction(const Eigen::VectorXd& squared_norms, const Eigen::VectorXd& log_w) {
  if (squared_norms.size() != log_w.size()) throw InputError("shape_error", "norms and weights differ in length");
  const Eigen::VectorXd w = log_w.array().exp();
  const double expected = w.dot(squared_norms);
  return (-2.0 * squared_norms.array() + 2.0 * expected).matrix();
}

Eigen::VectorXd teleport_direction(const ScoreField& score, const ParticleEnsemble& ens, const MaskMatrix& mask) {
  const RowMatrix s = score(ens.x_imp);
  check_scores(s);
  return teleport_direction(masked_squared_norms(s, mask), ens.log_w);
}

Eigen::VectorXd normalize_weights(const Eigen::VectorXd& log_w_hat) {
  if (log_w_hat.size() == 0) throw InputError("degenerate_ensemble", "empty ensemble");
  if (log_w_hat.array().isNaN().any() || (log_w_hat.array() == std::numeric_limits<double>::infinity()).any())
    throw NumericError("degenerate_ensemble", "log-weights contain NaN or +inf");
  const double mx = log_w_hat.maxCoeff();
  if (!std::isfinite(mx)) throw NumericError("degenerate_ensemble", "all log-weights are -inf");
  const double lse = mx + std::log((log_w_hat.array() - mx).exp().sum());
  return (log_w_hat.array() - lse).matrix();
}

double weight_entropy(const Eigen::VectorXd& log_w) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < log_w.size(); ++i)
    if (std::isfinite(log_w(i))) h -= std::exp(log_w(i)) * log_w(i);
  return h;
}

double spirit_step(const ScoreField& score, ParticleEnsemble& ens, const WindowSet& ws, const SpiritConfig& cfg, Rng& rng) {
  const RowMatrix s = score(ens.x_imp);
  check_scores(s);
  const Eigen::VectorXd norms = masked_squared_norms(s, ws.mask);
  const double mean_norm = ens.log_w.array().exp().matrix().dot(norms);

  if (!cfg.frozen_weights()) {
    Eigen::VectorXd tw = teleport_direction(norms, ens.log_w);
    if (cfg.teleport_sign_flip) tw = -tw;
    ens.log_w = normalize_weights(ens.log_w + cfg.eta * tw);
  }

  const double n = static_cast<double>(ens.x_imp.rows());
  const double noise_scale = std::sqrt(2.0 * cfg.eta);
  for (Eigen::Index i = 0; i < ens.x_imp.rows(); ++i) {
    const double step = cfg.weight_scaling ? cfg.eta * std::exp(ens.log_w(i)) * n : cfg.eta;
    for (Eigen::Index c = 0; c < ens.x_imp.cols(); ++c) {
      if (!ws.mask(i, c)) continue;
      ens.x_imp(i, c) += step * s(i, c);
      if (cfg.injects_noise()) ens.x_imp(i, c) += noise_scale * rng.normal();
    }
  }
  clamp_observed(ens.x_imp, ws);
  ++ens.iteration;
  return mean_norm;
}

SpiritRun run_spirit(const WindowSet& ws, const SpiritConfig& cfg, const DsmConfig& dsm, const TraceSink& sink) {
  cfg.validate();
  dsm.validate();
  SpiritRun run;
  if (ws.missing_count() == 0) {
    run.imputed = ws.obs;
    run.imputed_raw = to_raw(ws, run.imputed);
    Rng init_rng(cfg.seed, {kStreamInit});
    run.ensemble = init_imputation(ws, cfg, init_rng);
    return run;
  }

  Rng init_rng(cfg.seed, {kStreamInit});
  Rng net_rng(dsm.seed, {kStreamNet});
  Rng step_rng(cfg.seed, {kStreamStep});
  run.ensemble = init_imputation(ws, cfg, init_rng);
  ParticleEnsemble& ens = run.ensemble;
  ScoreNetwork net = ScoreNetwork::initialize(ws.width(), dsm.hidden_dim, net_rng, dsm.network_output_scale());

  for (std::size_t round = 0; round < cfg.outer_rounds; ++round) {
    Rng train_rng(dsm.seed, {kStreamTrain, round});
    TrainResult trained = train_dsm(std::move(net), ens.x_imp, dsm, train_rng);
    net = std::move(trained.net);
    run.trace.epoch_losses.insert(run.trace.epoch_losses.end(), trained.loss_trace.begin(), trained.loss_trace.end());

    // Fixed probe noise per round so the per-iteration DSM loss tracks the particles, not the draw.
    Rng eval_rng(dsm.seed, {kStreamEval, round});
    const RowMatrix probe = draw_dsm_noise(ws.n, ws.width(), dsm.sigma, eval_rng);
    const NetworkScore field(net);
    for (std::size_t it = 0; it < cfg.imp_iters; ++it) {
      TraceRecord rec;
      rec.round = round;
      rec.iter = ens.iteration;
      rec.mean_score_norm = spirit_step(field, ens, ws, cfg, step_rng);
      rec.dsm_loss = dsm_loss(net, ens.x_imp, probe, dsm);
      const MetricsReport m = masked_mae_mse(ws, ens.x_imp);
      rec.mae = m.mae;
      rec.mse = m.mse;
      rec.weight_entropy = weight_entropy(ens.log_w);
      if (!std::isfinite(rec.dsm_loss) || !std::isfinite(rec.mae) || !std::isfinite(rec.mean_score_norm))
        throw NumericError("numeric_overflow", "imputation diverged at iteration " + std::to_string(rec.iter));
      run.trace.records.push_back(rec);
      if (sink) sink(rec);
    }
  }
  run.net = std::move(net);
  run.imputed = ens.x_imp;
  run.imputed_raw = to_raw(ws, run.imputed);
  return run;
}

SpiritRun run_variant(const WindowSet& ws, const SpiritConfig& cfg, const DsmConfig& dsm, const TraceSink& sink) {
  if (cfg.variant != Variant::MeanImputation) return run_spirit(ws, cfg, dsm, sink);
  cfg.validate();
  SpiritConfig mean_cfg = cfg;
  mean_cfg.init_mode = InitMode::Mean;
  Rng init_rng(cfg.seed, {kStreamInit});
  SpiritRun run;
  run.ensemble = init_imputation(ws, mean_cfg, init_rng);
  run.imputed = run.ensemble.x_imp;
  run.imputed_raw = to_raw(ws, run.imputed);
  return run;
}

}  // namespace spirit
