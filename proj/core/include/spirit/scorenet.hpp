#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "spirit/data.hpp"
#include "spirit/rng.hpp"

namespace spirit {

/// Parameter blocks of the score network, in a fixed order shared by the
/// optimizer, the checkpoint format and the gradient checker.
enum class Block : std::size_t { W1, B1, Ln1Scale, Ln1Shift, W2, B2, Ln2Scale, Ln2Shift, W3, B3 };
inline constexpr std::size_t kBlockCount = 10;
inline constexpr std::array<std::string_view, kBlockCount> kBlockNames = {
    "W1", "b1", "ln1_scale", "ln1_shift", "W2", "b2", "ln2_scale", "ln2_shift", "W3", "b3"};

/// A full set of parameter-shaped tensors. Vectors are stored as [k x 1].
struct Parameters {
  std::array<Eigen::MatrixXd, kBlockCount> blocks;

  Eigen::MatrixXd& operator[](Block b) { return blocks[static_cast<std::size_t>(b)]; }
  const Eigen::MatrixXd& operator[](Block b) const { return blocks[static_cast<std::size_t>(b)]; }

  Parameters zeros_like() const;
  std::size_t size() const;
  bool all_finite() const;
};

/// Three-layer MLP s(x) = scale * (W3 a2 + b3), with
/// a_k = silu(LN_k(W_k a_{k-1} + b_k)) and learnable per-unit LN scale/shift.
class ScoreNetwork {
 public:
  ScoreNetwork() = default;

  /// Kaiming-uniform (fan-in) weights, zero biases, LN scale 1 / shift 0.
  static ScoreNetwork initialize(std::size_t input_dim, std::size_t hidden_dim, Rng& rng, double output_scale = 1.0);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  double output_scale() const { return output_scale_; }

  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Row-wise evaluation of a [B x input_dim] batch.
  RowMatrix forward(const RowMatrix& batch) const;

  /// Intermediate activations, column per sample.
  struct Trace {
    Eigen::MatrixXd input;
    Eigen::MatrixXd xhat1, rstd1, act1;  // rstd is [1 x B]
    Eigen::MatrixXd xhat2, rstd2, act2;
    Eigen::MatrixXd pre1, pre2;          // post-affine, pre-activation
    Eigen::MatrixXd output;
  };
  Trace forward_trace(const RowMatrix& batch) const;

  /// Reverse-mode pass. `d_output` is dL/d(output) in column-per-sample layout.
  Parameters backward(const Trace& trace, const Eigen::MatrixXd& d_output) const;

  static constexpr double kLayerNormEps = 1e-9;

 private:
  friend ScoreNetwork load_checkpoint(std::istream& in);
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  double output_scale_ = 1.0;
  Parameters params_;
};

struct DsmConfig {
  double sigma = 0.1;
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  std::size_t hidden_dim = 256;
  std::uint64_t seed = 0;
  /// When set, the loss is sigma^2 * ||s + eps/sigma^2||^2 = ||sigma s + eps/sigma||^2,
  /// i.e. the noise-prediction parameterization. Same minimizer as the raw loss.
  bool noise_weighting = true;

  void validate() const;
  bool operator==(const DsmConfig&) const = default;
  /// Output scale used when building a network for this config: a network
  /// trained with noise weighting predicts -eps/sigma, so its score is output/sigma.
  double network_output_scale() const { return noise_weighting ? 1.0 / sigma : 1.0; }
};

struct DsmResult {
  double loss = 0.0;
  Parameters grads;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_block;
  std::size_t checked_entries = 0;
};

/// Draws eps ~ N(0, sigma^2 I) per sample and evaluates the denoising score
/// matching loss mean_b ||s(x_b + eps_b) + eps_b / sigma^2||^2 with exact gradients.
DsmResult dsm_loss_and_grad(const ScoreNetwork& net, const RowMatrix& batch, const DsmConfig& cfg, Rng& rng);

/// Same objective with caller-supplied noise (one row per sample).
DsmResult dsm_loss_and_grad(const ScoreNetwork& net, const RowMatrix& batch, const RowMatrix& noise, const DsmConfig& cfg);
double dsm_loss(const ScoreNetwork& net, const RowMatrix& batch, const RowMatrix& noise, const DsmConfig& cfg);

/// DSM objective for precomputed scores s(x + eps), one row per sample. Lets
/// callers plug in analytic scores (e.g. the exact conditional Gaussian score).
double dsm_loss_from_scores(const RowMatrix& scores, const RowMatrix& noise, const DsmConfig& cfg);

RowMatrix draw_dsm_noise(std::size_t rows, std::size_t cols, double sigma, Rng& rng);

namespace detail {
/// `target_sign` = -1 is the correct denoising target -eps/sigma^2. Other
/// values exist only so tests can inject a sign bug.
DsmResult dsm_loss_and_grad_impl(const ScoreNetwork& net, const RowMatrix& batch, const RowMatrix& noise,
                                 const DsmConfig& cfg, double target_sign, bool want_grads);
double dsm_loss_from_scores_impl(const RowMatrix& scores, const RowMatrix& noise, const DsmConfig& cfg, double target_sign);
}  // namespace detail

class AdamOptimizer {
 public:
  explicit AdamOptimizer(const Parameters& shape, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Parameters& params, const Parameters& grads);
  std::size_t steps() const { return t_; }

 private:
  Parameters m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TrainResult {
  ScoreNetwork net;
  std::vector<double> loss_trace;  // mean minibatch loss per epoch
};

/// Adam over shuffled minibatches for cfg.epochs epochs. Throws
/// NumericError("training_diverged") once an epoch loss exceeds 1e8.
TrainResult train_dsm(ScoreNetwork net, const RowMatrix& windows, const DsmConfig& cfg, Rng& rng);

inline constexpr int kCheckpointFormatVersion = 1;
void save_checkpoint(const ScoreNetwork& net, std::ostream& out);
ScoreNetwork load_checkpoint(std::istream& in);

}  // namespace spirit
