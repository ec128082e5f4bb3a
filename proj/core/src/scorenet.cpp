#include "spirit/scorenet.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spirit/error.hpp"

namespace spirit {

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

// Layer norm over rows (features) of each column; returns normalized values and 1/std.
void layer_norm(const Eigen::MatrixXd& z, Eigen::MatrixXd& xhat, Eigen::MatrixXd& rstd) {
  const double h = static_cast<double>(z.rows());
  const Eigen::RowVectorXd mean = z.colwise().sum() / h;
  xhat = z.rowwise() - mean;
  const Eigen::RowVectorXd var = xhat.array().square().colwise().sum() / h;
  rstd = (var.array() + ScoreNetwork::kLayerNormEps).rsqrt().matrix();
  xhat.array().rowwise() *= rstd.row(0).array();
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& d_xhat, const Eigen::MatrixXd& xhat, const Eigen::MatrixXd& rstd) {
  const double h = static_cast<double>(xhat.rows());
  const Eigen::RowVectorXd mean_d = d_xhat.colwise().sum() / h;
  const Eigen::RowVectorXd mean_dx = (d_xhat.array() * xhat.array()).colwise().sum() / h;
  Eigen::MatrixXd dz = d_xhat;
  dz.rowwise() -= mean_d;
  dz.array() -= xhat.array().rowwise() * mean_dx.array();
  dz.array().rowwise() *= rstd.row(0).array();
  return dz;
}

}  // namespace

Parameters Parameters::zeros_like() const {
  Parameters out;
  for (std::size_t k = 0; k < kBlockCount; ++k) out.blocks[k] = Eigen::MatrixXd::Zero(blocks[k].rows(), blocks[k].cols());
  return out;
}

std::size_t Parameters::size() const {
  std::size_t total = 0;
  for (const auto& b : blocks) total += static_cast<std::size_t>(b.size());
  return total;
}

bool Parameters::all_finite() const {
  for (const auto& b : blocks)
    if (!b.allFinite()) return false;
  return true;
}

ScoreNetwork ScoreNetwork::initialize(std::size_t input_dim, std::size_t hidden_dim, Rng& rng, double output_scale) {
  if (input_dim == 0 || hidden_dim == 0) throw InputError("invalid_config", "network dimensions must be positive");
  ScoreNetwork net;
  net.input_dim_ = input_dim;
  net.hidden_dim_ = hidden_dim;
  net.output_scale_ = output_scale;
  const auto in = static_cast<Eigen::Index>(input_dim);
  const auto hid = static_cast<Eigen::Index>(hidden_dim);
  auto kaiming = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(cols));
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = rng.uniform(-bound, bound);
    return w;
  };
  auto& p = net.params_;
  p[Block::W1] = kaiming(hid, in);
  p[Block::B1] = Eigen::MatrixXd::Zero(hid, 1);
  p[Block::Ln1Scale] = Eigen::MatrixXd::Ones(hid, 1);
  p[Block::Ln1Shift] = Eigen::MatrixXd::Zero(hid, 1);
  p[Block::W2] = kaiming(hid, hid);
  p[Block::B2] = Eigen::MatrixXd::Zero(hid, 1);
  p[Block::Ln2Scale] = Eigen::MatrixXd::Ones(hid, 1);
  p[Block::Ln2Shift] = Eigen::MatrixXd::Zero(hid, 1);
  p[Block::W3] = kaiming(in, hid);
  p[Block::B3] = Eigen::MatrixXd::Zero(in, 1);
  return net;
}

ScoreNetwork::Trace ScoreNetwork::forward_trace(const RowMatrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != input_dim_) {
    throw InputError("shape_error", "score network expects inputs of width " + std::to_string(input_dim_) + ", got " +
                                        std::to_string(batch.cols()));
  }
  if (!batch.allFinite()) throw InputError("invalid_input", "score network input contains non-finite values");
  const auto& p = params_;
  Trace tr;
  tr.input = batch.transpose();

  Eigen::MatrixXd z = p[Block::W1] * tr.input;
  z.colwise() += p[Block::B1].col(0);
  layer_norm(z, tr.xhat1, tr.rstd1);
  tr.pre1 = (tr.xhat1.array().colwise() * p[Block::Ln1Scale].col(0).array()).colwise() + p[Block::Ln1Shift].col(0).array();
  tr.act1 = (tr.pre1.array() * sigmoid(tr.pre1).array()).matrix();

  z = p[Block::W2] * tr.act1;
  z.colwise() += p[Block::B2].col(0);
  layer_norm(z, tr.xhat2, tr.rstd2);
  tr.pre2 = (tr.xhat2.array().colwise() * p[Block::Ln2Scale].col(0).array()).colwise() + p[Block::Ln2Shift].col(0).array();
  tr.act2 = (tr.pre2.array() * sigmoid(tr.pre2).array()).matrix();

  tr.output = p[Block::W3] * tr.act2;
  tr.output.colwise() += p[Block::B3].col(0);
  tr.output *= output_scale_;
  return tr;
}

RowMatrix ScoreNetwork::forward(const RowMatrix& batch) const { return forward_trace(batch).output.transpose(); }

Eigen::VectorXd ScoreNetwork::forward(const Eigen::VectorXd& x) const {
  RowMatrix row = x.transpose();
  return forward_trace(row).output.col(0);
}

Parameters ScoreNetwork::backward(const Trace& tr, const Eigen::MatrixXd& d_output) const {
  const auto& p = params_;
  Parameters g = p.zeros_like();
  const Eigen::MatrixXd d_lin = d_output * output_scale_;

  g[Block::W3].noalias() = d_lin * tr.act2.transpose();
  g[Block::B3] = d_lin.rowwise().sum();
  Eigen::MatrixXd d_act = p[Block::W3].transpose() * d_lin;

  auto silu_grad = [](const Eigen::MatrixXd& y) {
    const Eigen::ArrayXXd s = sigmoid(y).array();
    return (s * (1.0 + y.array() * (1.0 - s))).eval();
  };

  Eigen::MatrixXd d_pre = (d_act.array() * silu_grad(tr.pre2)).matrix();
  g[Block::Ln2Scale] = (d_pre.array() * tr.xhat2.array()).rowwise().sum().matrix();
  g[Block::Ln2Shift] = d_pre.rowwise().sum();
  Eigen::MatrixXd d_xhat = (d_pre.array().colwise() * p[Block::Ln2Scale].col(0).array()).matrix();
  Eigen::MatrixXd dz = layer_norm_backward(d_xhat, tr.xhat2, tr.rstd2);
  g[Block::W2].noalias() = dz * tr.act1.transpose();
  g[Block::B2] = dz.rowwise().sum();
  d_act = p[Block::W2].transpose() * dz;

  d_pre = (d_act.array() * silu_grad(tr.pre1)).matrix();
  g[Block::Ln1Scale] = (d_pre.array() * tr.xhat1.array()).rowwise().sum().matrix();
  g[Block::Ln1Shift] = d_pre.rowwise().sum();
  d_xhat = (d_pre.array().colwise() * p[Block::Ln1Scale].col(0).array()).matrix();
  dz = layer_norm_backward(d_xhat, tr.xhat1, tr.rstd1);
  g[Block::W1].noalias() = dz * tr.input.transpose();
  g[Block::B1] = dz.rowwise().sum();
  return g;
}

void DsmConfig::validate() const {
  if (!(sigma > 0.0)) throw InputError("invalid_config", "dsm.sigma must be positive");
  if (!(learning_rate > 0.0)) throw InputError("invalid_config", "dsm.learning_rate must be positive");
  if (batch_size == 0) throw InputError("invalid_config", "dsm.batch_size must be at least 1");
  if (hidden_dim == 0) throw InputError("invalid_config", "dsm.hidden_dim must be at least 1");
}

RowMatrix draw_dsm_noise(std::size_t rows, std::size_t cols, double sigma, Rng& rng) {
  RowMatrix noise(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = sigma * rng.normal();
  return noise;
}

namespace detail {

DsmResult dsm_loss_and_grad_impl(const ScoreNetwork& net, const RowMatrix& batch, const RowMatrix& noise,
                                 const DsmConfig& cfg, double target_sign, bool want_grads) {
  cfg.validate();
  if (batch.rows() == 0) throw InputError("invalid_input", "empty DSM batch");
  if (noise.rows() != batch.rows() || noise.cols() != batch.cols()) throw InputError("shape_error", "noise/batch shape mismatch");
  const double s2 = cfg.sigma * cfg.sigma;
  const RowMatrix perturbed = batch + noise;
  const auto trace = net.forward_trace(perturbed);

  // residual = s(x + eps) - target, target = target_sign * eps / sigma^2
  Eigen::MatrixXd residual = trace.output - (target_sign / s2) * noise.transpose();
  const double weight = cfg.noise_weighting ? s2 : 1.0;
  const double b = static_cast<double>(batch.rows());
  const Eigen::RowVectorXd per_sample = residual.array().square().colwise().sum();
  for (Eigen::Index i = 0; i < per_sample.size(); ++i) {
    if (!std::isfinite(per_sample(i))) {
      throw NumericError("numeric_overflow", "non-finite DSM loss at batch index " + std::to_string(i));
    }
  }
  DsmResult result;
  result.loss = weight * per_sample.sum() / b;
  if (want_grads) result.grads = net.backward(trace, (2.0 * weight / b) * residual);
  return result;
}

double dsm_loss_from_scores_impl(const RowMatrix& scores, const RowMatrix& noise, const DsmConfig& cfg, double target_sign) {
  cfg.validate();
  if (scores.rows() == 0) throw InputError("invalid_input", "empty DSM batch");
  if (noise.rows() != scores.rows() || noise.cols() != scores.cols()) throw InputError("shape_error", "noise/score shape mismatch");
  const double s2 = cfg.sigma * cfg.sigma;
  const double weight = cfg.noise_weighting ? s2 : 1.0;
  const RowMatrix residual = scores - (target_sign / s2) * noise;
  return weight * residual.squaredNorm() / static_cast<double>(scores.rows());
}

}  // namespace detail

double dsm_loss_from_scores(const RowMatrix& scores, const RowMatrix& noise, const DsmConfig& cfg) {
  return detail::dsm_loss_from_scores_impl(scores, noise, cfg, -1.0);
}

DsmResult dsm_loss_and_grad(const ScoreNetwork& net, const RowMatrix& batch, const RowMatrix& noise, const DsmConfig& cfg) {
  return detail::dsm_loss_and_grad_impl(net, batch, noise, cfg, -1.0, true);
}

DsmResult dsm_loss_and_grad(const ScoreNetwork& net, const RowMatrix& batch, const DsmConfig& cfg, Rng& rng) {
  const RowMatrix noise = draw_dsm_noise(static_cast<std::size_t>(batch.rows()), static_cast<std::size_t>(batch.cols()),
                                         cfg.sigma, rng);
  return dsm_loss_and_grad(net, batch, noise, cfg);
}

double dsm_loss(const ScoreNetwork& net, const RowMatrix& batch, const RowMatrix& noise, const DsmConfig& cfg) {
  return detail::dsm_loss_and_grad_impl(net, batch, noise, cfg, -1.0, false).loss;
}

AdamOptimizer::AdamOptimizer(const Parameters& shape, double lr, double beta1, double beta2, double eps)
    : m_(shape.zeros_like()), v_(shape.zeros_like()), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(Parameters& params, const Parameters& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < kBlockCount; ++k) {
    auto& m = m_.blocks[k];
    auto& v = v_.blocks[k];
    const auto& g = grads.blocks[k];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    params.blocks[k].array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

TrainResult train_dsm(ScoreNetwork net, const RowMatrix& windows, const DsmConfig& cfg, Rng& rng) {
  cfg.validate();
  if (windows.rows() == 0) throw InputError("invalid_input", "train_dsm needs at least one window");
  TrainResult result;
  if (cfg.epochs == 0) {
    result.net = std::move(net);
    return result;
  }
  AdamOptimizer adam(net.params(), cfg.learning_rate);
  const auto n = static_cast<std::size_t>(windows.rows());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  RowMatrix batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      batch.resize(static_cast<Eigen::Index>(stop - start), windows.cols());
      for (std::size_t r = start; r < stop; ++r) batch.row(static_cast<Eigen::Index>(r - start)) = windows.row(order[r]);
      DsmResult step = dsm_loss_and_grad(net, batch, cfg, rng);
      adam.step(net.params(), step.grads);
      total += step.loss;
      ++batches;
    }
    const double mean_loss = total / static_cast<double>(batches);
    if (!std::isfinite(mean_loss) || mean_loss > 1e8 || !net.params().all_finite()) {
      throw NumericError("training_diverged", "DSM training diverged at epoch " + std::to_string(epoch) +
                                                  " (loss " + std::to_string(mean_loss) + ")");
    }
    result.loss_trace.push_back(mean_loss);
  }
  result.net = std::move(net);
  return result;
}

void save_checkpoint(const ScoreNetwork& net, std::ostream& out) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["kind"] = "spirit.score_network";
  j["input_dim"] = net.input_dim();
  j["hidden_dim"] = net.hidden_dim();
  j["output_scale"] = net.output_scale();
  auto& arr = j["parameters"] = nlohmann::json::array();
  for (std::size_t k = 0; k < kBlockCount; ++k) {
    const auto& m = net.params().blocks[k];
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    arr.push_back({{"name", kBlockNames[k]}, {"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}});
  }
  out << j.dump();
}

ScoreNetwork load_checkpoint(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("parse_error", std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (j.value("format_version", 0) != kCheckpointFormatVersion) throw InputError("checkpoint_version", "unsupported checkpoint format version");
  ScoreNetwork net;
  net.input_dim_ = j.at("input_dim").get<std::size_t>();
  net.hidden_dim_ = j.at("hidden_dim").get<std::size_t>();
  net.output_scale_ = j.at("output_scale").get<double>();
  const auto& arr = j.at("parameters");
  if (arr.size() != kBlockCount) throw InputError("checkpoint_shape", "checkpoint has the wrong number of parameter blocks");
  const auto in_dim = static_cast<Eigen::Index>(net.input_dim_);
  const auto hid = static_cast<Eigen::Index>(net.hidden_dim_);
  const std::array<std::pair<Eigen::Index, Eigen::Index>, kBlockCount> expected = {{
      {hid, in_dim}, {hid, 1}, {hid, 1}, {hid, 1}, {hid, hid}, {hid, 1}, {hid, 1}, {hid, 1}, {in_dim, hid}, {in_dim, 1}}};
  for (std::size_t k = 0; k < kBlockCount; ++k) {
    const auto& entry = arr[k];
    if (entry.at("name").get<std::string>() != kBlockNames[k]) throw InputError("checkpoint_shape", "unexpected block order");
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != expected[k].first || shape[1] != expected[k].second)
      throw InputError("checkpoint_shape", "block " + std::string(kBlockNames[k]) + " has the wrong shape");
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1])
      throw InputError("checkpoint_shape", "block " + std::string(kBlockNames[k]) + " has the wrong length");
    Eigen::MatrixXd m(shape[0], shape[1]);
    std::size_t idx = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[idx++];
    net.params_.blocks[k] = std::move(m);
  }
  return net;
}

}  // namespace spirit
