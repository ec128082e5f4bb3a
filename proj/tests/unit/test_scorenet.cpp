#include <doctest.h>

#include <cmath>
#include <sstream>

#include "spirit/error.hpp"
#include "spirit/eval.hpp"
#include "spirit/scorenet.hpp"

using namespace spirit;

namespace {

RowMatrix gaussian_rows(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  RowMatrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = scale * rng.normal();
  return x;
}

}  // namespace

TEST_CASE("zeroed last layer outputs its bias") {
  Rng rng(1);
  ScoreNetwork net = ScoreNetwork::initialize(6, 8, rng, 2.0);
  net.params()[Block::W3].setZero();
  Eigen::VectorXd x(6);
  x << 1, -2, 3, 0.5, 0, 9;
  CHECK(net.forward(x).cwiseAbs().maxCoeff() == 0.0);
  net.params()[Block::B3].setConstant(0.25);
  // Output is scaled by the network's output scale.
  CHECK(net.forward(x).isConstant(0.5));
}

TEST_CASE("forward is deterministic and batch rows match single evaluations") {
  Rng rng(2);
  const ScoreNetwork net = ScoreNetwork::initialize(5, 16, rng);
  const RowMatrix batch = gaussian_rows(4, 5, rng);
  const RowMatrix a = net.forward(batch), b = net.forward(batch);
  CHECK(a == b);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const Eigen::VectorXd xi = batch.row(i).transpose();
    CHECK((net.forward(xi) - a.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("non-finite or misshaped input is rejected") {
  Rng rng(3);
  const ScoreNetwork net = ScoreNetwork::initialize(3, 4, rng);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  x(1) = std::nan("");
  CHECK_THROWS_AS(net.forward(x), InputError);
  try {
    net.forward(x);
  } catch (const Error& e) {
    CHECK(e.code() == "invalid_input");
  }
  const Eigen::VectorXd wide = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(net.forward(wide), InputError);
}

TEST_CASE("perfect score has zero DSM loss") {
  Rng rng(4);
  for (bool weighting : {false, true}) {
    DsmConfig cfg;
    cfg.sigma = 0.3;
    cfg.noise_weighting = weighting;
    const RowMatrix noise = draw_dsm_noise(32, 10, cfg.sigma, rng);
    const RowMatrix scores = -noise / (cfg.sigma * cfg.sigma);
    CHECK(dsm_loss_from_scores(scores, noise, cfg) < 1e-20);
  }
}

TEST_CASE("zero network loss matches D / sigma^2 within three standard errors") {
  constexpr std::size_t kDim = 168, kSamples = 10000;
  constexpr double kSigma = 0.5;
  Rng rng(5);
  ScoreNetwork net = ScoreNetwork::initialize(kDim, 4, rng);
  net.params()[Block::W3].setZero();
  DsmConfig cfg;
  cfg.sigma = kSigma;
  cfg.noise_weighting = false;
  const RowMatrix batch = RowMatrix::Zero(kSamples, kDim);
  const RowMatrix noise = draw_dsm_noise(kSamples, kDim, kSigma, rng);
  const double loss = dsm_loss(net, batch, noise, cfg);
  // Each coordinate contributes (eps/sigma^2)^2 with mean 1/sigma^2 and variance 2/sigma^4.
  const double expected = kDim / (kSigma * kSigma);
  const double se = std::sqrt(2.0 * kDim) / (kSigma * kSigma) / std::sqrt(double(kSamples));
  CHECK(expected == doctest::Approx(672.0));
  CHECK(std::abs(loss - expected) < 3.0 * se);

  // Noise-prediction weighting rescales the same objective by sigma^2.
  cfg.noise_weighting = true;
  net = ScoreNetwork::initialize(kDim, 4, rng, cfg.network_output_scale());
  net.params()[Block::W3].setZero();
  CHECK(std::abs(dsm_loss(net, batch, noise, cfg) - double(kDim)) < 3.0 * std::sqrt(2.0 * kDim) / std::sqrt(double(kSamples)));
}

TEST_CASE("zero epochs leave the network untouched") {
  Rng rng(6);
  const ScoreNetwork net = ScoreNetwork::initialize(4, 8, rng);
  DsmConfig cfg;
  cfg.epochs = 0;
  const TrainResult r = train_dsm(net, gaussian_rows(10, 4, rng), cfg, rng);
  CHECK(r.loss_trace.empty());
  for (std::size_t k = 0; k < kBlockCount; ++k) CHECK(r.net.params().blocks[k] == net.params().blocks[k]);
}

TEST_CASE("learned 1-D score matches the perturbed Gaussian score") {
  // N(0, 1) data perturbed with sigma = 0.5 has score -x / (1 + sigma^2).
  Rng rng(7);
  const RowMatrix data = gaussian_rows(2000, 1, rng);
  DsmConfig cfg;
  cfg.sigma = 0.5;
  cfg.epochs = 200;
  cfg.hidden_dim = 32;
  cfg.learning_rate = 1e-3;
  const ScoreNetwork init = ScoreNetwork::initialize(1, cfg.hidden_dim, rng, cfg.network_output_scale());
  const TrainResult r = train_dsm(init, data, cfg, rng);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1), one = Eigen::VectorXd::Ones(1);
  const double s0 = r.net.forward(zero)(0);
  const double s1 = r.net.forward(one)(0);
  CHECK(std::abs(s0) <= 0.15);
  CHECK(s1 * 1.0 < 0.0);
  CHECK(s1 == doctest::Approx(-1.0 / 1.25).epsilon(0.3));

  // The epoch loss decreases and then levels off.
  const ConvergenceSummary conv = convergence_report(r.loss_trace);
  CHECK(conv.plateau_detected);
  CHECK(conv.final_over_initial < 1.0);
}

TEST_CASE("training rejects empty data and invalid configs") {
  Rng rng(8);
  const ScoreNetwork net = ScoreNetwork::initialize(2, 4, rng);
  CHECK_THROWS_AS(train_dsm(net, RowMatrix(0, 2), DsmConfig{}, rng), InputError);
  DsmConfig bad;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("checkpoint round-trip is exact") {
  Rng rng(9);
  const ScoreNetwork net = ScoreNetwork::initialize(7, 5, rng, 3.0);
  std::stringstream ss;
  save_checkpoint(net, ss);
  const ScoreNetwork back = load_checkpoint(ss);
  CHECK(back.input_dim() == 7);
  CHECK(back.hidden_dim() == 5);
  CHECK(back.output_scale() == 3.0);
  for (std::size_t k = 0; k < kBlockCount; ++k) CHECK(back.params().blocks[k] == net.params().blocks[k]);

  std::stringstream bad("{\"format_version\": 99}");
  CHECK_THROWS_AS(load_checkpoint(bad), InputError);
}

TEST_CASE("adam moves parameters against the gradient") {
  Parameters p;
  for (auto& b : p.blocks) b = Eigen::MatrixXd::Ones(2, 1);
  Parameters g = p.zeros_like();
  g.blocks[0](0, 0) = 1.0;
  g.blocks[0](1, 0) = -1.0;
  AdamOptimizer adam(p, 0.1);
  adam.step(p, g);
  CHECK(p.blocks[0](0, 0) == doctest::Approx(0.9));
  CHECK(p.blocks[0](1, 0) == doctest::Approx(1.1));
  CHECK(p.blocks[1](0, 0) == 1.0);
  CHECK(adam.steps() == 1);
}
