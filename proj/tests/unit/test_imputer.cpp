#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spirit/data.hpp"
#include "spirit/error.hpp"
#include "spirit/imputer.hpp"
#include "spirit/synthetic.hpp"
#include "spirit/toys.hpp"

using namespace spirit;

namespace {

WindowSet masked_synthetic(std::size_t windows = 30, std::size_t t = 6, std::size_t d = 3, std::uint64_t seed = 1) {
  const WindowSet base =
      standardize_and_window(generate_synthetic(SyntheticSpec{.windows = windows, .patch_length = t, .features = d, .seed = seed}), t);
  MaskSpec m;
  m.seed = seed;
  return simulate_mcar(base, m);
}

class ConstantScore final : public ScoreField {
 public:
  explicit ConstantScore(double v) : v_(v) {}
  RowMatrix operator()(const RowMatrix& x) const override { return RowMatrix::Constant(x.rows(), x.cols(), v_); }

 private:
  double v_;
};

// Row i gets score sqrt(norms[i]) on its first column only.
class RowNormScore final : public ScoreField {
 public:
  explicit RowNormScore(Eigen::VectorXd norms) : norms_(std::move(norms)) {}
  RowMatrix operator()(const RowMatrix& x) const override {
    RowMatrix s = RowMatrix::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) s(i, 0) = std::sqrt(norms_(i));
    return s;
  }

 private:
  Eigen::VectorXd norms_;
};

}  // namespace

TEST_CASE("variant and init mode names round-trip") {
  for (Variant v : {Variant::Spirit, Variant::SpiritDissipative, Variant::W2Uniform, Variant::LangevinUniform,
                    Variant::MeanImputation})
    CHECK(parse_variant(to_string(v)) == v);
  for (InitMode m : {InitMode::Mean, InitMode::Zero, InitMode::MeanPlusNoise}) CHECK(parse_init_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_variant("csdi"), InputError);
}

TEST_CASE("config defaults") {
  // Step size 0.002 is the sampling step size used for every dataset.
  const SpiritConfig cfg;
  CHECK(cfg.eta == 0.002);
  CHECK(cfg.init_mode == InitMode::Mean);
  CHECK(cfg.variant == Variant::Spirit);
  CHECK_FALSE(cfg.teleport_sign_flip);
}

TEST_CASE("zero init fills masked entries with exactly zero and uniform weights") {
  const WindowSet ws = masked_synthetic();
  SpiritConfig cfg;
  cfg.init_mode = InitMode::Zero;
  Rng rng(1);
  const ParticleEnsemble ens = init_imputation(ws, cfg, rng);
  for (Eigen::Index k = 0; k < ens.x_imp.size(); ++k) {
    if (ws.mask.data()[k]) {
      CHECK(ens.x_imp.data()[k] == 0.0);
    } else {
      CHECK(ens.x_imp.data()[k] == ws.obs.data()[k]);
    }
  }
  const Eigen::VectorXd w = ens.weights();
  CHECK((w.array() - 1.0 / double(ws.n)).abs().maxCoeff() < 1e-15);
}

TEST_CASE("mean plus noise init is reproducible") {
  const WindowSet ws = masked_synthetic();
  SpiritConfig cfg;
  cfg.init_mode = InitMode::MeanPlusNoise;
  Rng a(9), b(9);
  CHECK(init_imputation(ws, cfg, a).x_imp == init_imputation(ws, cfg, b).x_imp);
}

TEST_CASE("fully missing feature falls back to zero with a warning") {
  const WindowSet base = standardize_and_window(generate_synthetic(SyntheticSpec{.windows = 4, .patch_length = 3, .features = 2}), 3);
  MaskMatrix mask = MaskMatrix::Zero(base.ideal.rows(), base.ideal.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (std::size_t t = 0; t < 3; ++t) mask(i, static_cast<Eigen::Index>(WindowSet::column(t, 1, 2))) = 1;
  const WindowSet ws = with_mask(base, mask);
  std::vector<std::string> warnings;
  Rng rng(0);
  const ParticleEnsemble ens = init_imputation(ws, SpiritConfig{}, rng, &warnings);
  CHECK(warnings.size() == 1);
  CHECK(ens.x_imp(0, 1) == 0.0);
}

TEST_CASE("transport direction is masked and follows the score") {
  const WindowSet ws = masked_synthetic();
  Rng rng(2);
  const ParticleEnsemble ens = init_imputation(ws, SpiritConfig{}, rng);
  const RowMatrix zero = transport_direction(ConstantScore(0.0), ens, ws.mask);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  const MaskMatrix none = MaskMatrix::Zero(ws.mask.rows(), ws.mask.cols());
  CHECK(transport_direction(ConstantScore(3.0), ens, none).cwiseAbs().maxCoeff() == 0.0);

  // 1-D Gaussian N(m, s^2): the direction points toward m.
  Eigen::VectorXd m(1);
  m << 0.7;
  const GaussianScore g(m, Eigen::MatrixXd::Constant(1, 1, 0.25));
  ParticleEnsemble line;
  line.x_imp = RowMatrix(5, 1);
  line.x_imp << -2, 0, 0.7, 1, 4;
  line.log_w = Eigen::VectorXd::Constant(5, -std::log(5.0));
  const RowMatrix dir = transport_direction(g, line, MaskMatrix::Ones(5, 1));
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(dir(i, 0) * (0.7 - line.x_imp(i, 0)) >= 0.0);
  CHECK(dir(0, 0) == doctest::Approx(2.7 / 0.25));
}

TEST_CASE("teleport direction hand cases") {
  Eigen::VectorXd norms(2), logw = Eigen::VectorXd::Constant(2, -std::log(2.0));
  norms << 1.0, 3.0;
  const Eigen::VectorXd t = teleport_direction(norms, logw);
  CHECK(t(0) == doctest::Approx(2.0));
  CHECK(t(1) == doctest::Approx(-2.0));
  const Eigen::VectorXd flat = teleport_direction(Eigen::VectorXd::Constant(4, 2.5), Eigen::VectorXd::Constant(4, -std::log(4.0)));
  CHECK(flat.cwiseAbs().maxCoeff() < 1e-15);

  ParticleEnsemble ens;
  ens.x_imp = RowMatrix::Zero(2, 3);
  ens.log_w = logw;
  const Eigen::VectorXd via_score = teleport_direction(RowNormScore(norms), ens, MaskMatrix::Ones(2, 3));
  CHECK((via_score - t).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalize weights") {
  Eigen::VectorXd v(2);
  v << 0.0, std::log(3.0);
  const Eigen::VectorXd w = normalize_weights(v).array().exp();
  CHECK(w(0) == doctest::Approx(0.25));
  CHECK(w(1) == doctest::Approx(0.75));
  v << 1e6, 1e6;
  const Eigen::VectorXd h = normalize_weights(v).array().exp();
  CHECK(h(0) == doctest::Approx(0.5));
  CHECK(h.allFinite());
  Rng rng(3);
  Eigen::VectorXd x(50);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  CHECK((normalize_weights((x.array() + 500.0).matrix()) - normalize_weights(x)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(normalize_weights(Eigen::VectorXd::Constant(3, -INFINITY)), NumericError);
  CHECK_THROWS_AS(normalize_weights(Eigen::VectorXd()), InputError);
}

TEST_CASE("zero step size only advances the counter") {
  const WindowSet ws = masked_synthetic();
  Rng rng(4);
  SpiritConfig cfg;
  cfg.eta = 0.0;
  for (Variant v : {Variant::Spirit, Variant::SpiritDissipative}) {
    cfg.variant = v;
    ParticleEnsemble ens = init_imputation(ws, cfg, rng);
    const ParticleEnsemble before = ens;
    spirit_step(ConstantScore(1.0), ens, ws, cfg, rng);
    CHECK(ens.x_imp == before.x_imp);
    CHECK((ens.log_w - before.log_w).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(ens.iteration == before.iteration + 1);
  }
}

TEST_CASE("nothing missing leaves particles fixed") {
  const WindowSet base = standardize_and_window(generate_synthetic(SyntheticSpec{.windows = 5, .patch_length = 4, .features = 2}), 4);
  Rng rng(5);
  SpiritConfig cfg;
  cfg.variant = Variant::SpiritDissipative;
  cfg.eta = 0.5;
  ParticleEnsemble ens = init_imputation(base, cfg, rng);
  for (int k = 0; k < 5; ++k) spirit_step(ConstantScore(7.0), ens, base, cfg, rng);
  CHECK(ens.x_imp == base.obs);

  // run_spirit short-circuits when there is nothing to impute.
  const SpiritRun run = run_spirit(base, cfg, DsmConfig{});
  CHECK(run.imputed == base.obs);
  CHECK(run.imputed_raw == base.raw);
  CHECK(run.trace.records.empty());
}

TEST_CASE("frozen-weight variants keep weights exactly uniform") {
  const WindowSet ws = masked_synthetic();
  Rng rng(6);
  for (Variant v : {Variant::W2Uniform, Variant::LangevinUniform}) {
    SpiritConfig cfg;
    cfg.variant = v;
    ParticleEnsemble ens = init_imputation(ws, cfg, rng);
    const Eigen::VectorXd before = ens.log_w;
    for (int k = 0; k < 50; ++k) spirit_step(RowNormScore(Eigen::VectorXd::LinSpaced(ws.n, 0.0, 5.0)), ens, ws, cfg, rng);
    CHECK(ens.log_w == before);
  }
}

TEST_CASE("non-finite scores surface as numeric errors") {
  const WindowSet ws = masked_synthetic();
  Rng rng(7);
  ParticleEnsemble ens = init_imputation(ws, SpiritConfig{}, rng);
  try {
    spirit_step(ConstantScore(NAN), ens, ws, SpiritConfig{}, rng);
    FAIL("expected numeric_overflow");
  } catch (const NumericError& e) {
    CHECK(e.code() == "numeric_overflow");
    CHECK(e.exit_code() == 1);
  }
}

TEST_CASE("deterministic flow collapses onto the conditional mode") {
  const GaussianToySpec spec;
  CHECK(spec.conditional_std() == doctest::Approx(0.3).epsilon(1e-12));
  const ToyResult r = run_gaussian_toy(ToySampler::Deterministic, 0, spec);
  for (Eigen::Index i = 0; i < r.particles.rows(); ++i) {
    CHECK(r.particles(i, 0) == spec.observed_x1);
    CHECK(std::abs(r.particles(i, 1) - spec.conditional_mode()) < 0.05);
  }
  CHECK(r.median_to_mode < 0.05);
}

TEST_CASE("Langevin with uniform weights samples the conditional law") {
  const GaussianToySpec spec;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ToyResult det = run_gaussian_toy(ToySampler::Deterministic, seed, spec);
    const ToyResult wiener = run_gaussian_toy(ToySampler::Wiener, seed, spec);
    CHECK(wiener.median_to_mode > det.median_to_mode);
    CHECK(wiener.spread_std == doctest::Approx(spec.conditional_std()).epsilon(0.2));
    CHECK(wiener.weights.isApproxToConstant(1.0 / double(spec.particles)));
  }
}

TEST_CASE("mean imputation variant returns the initial fill") {
  const WindowSet ws = masked_synthetic();
  SpiritConfig cfg;
  cfg.variant = Variant::MeanImputation;
  const SpiritRun run = run_variant(ws, cfg, DsmConfig{});
  Rng rng(0);
  CHECK(run.imputed == init_imputation(ws, cfg, rng).x_imp);
  CHECK(run.trace.records.empty());
}

TEST_CASE("short run produces a full trace and streams it") {
  const WindowSet ws = masked_synthetic();
  SpiritConfig cfg;
  cfg.outer_rounds = 2;
  cfg.imp_iters = 4;
  DsmConfig dsm;
  dsm.epochs = 3;
  dsm.hidden_dim = 16;
  std::size_t streamed = 0;
  const SpiritRun run = run_spirit(ws, cfg, dsm, [&](const TraceRecord&) { ++streamed; });
  CHECK(run.trace.records.size() == 8);
  CHECK(streamed == 8);
  CHECK(run.trace.epoch_losses.size() == 6);
  CHECK(run.trace.records.back().round == 1);
  CHECK(run.trace.records.back().iter == 7);
  for (const auto& r : run.trace.records) {
    CHECK(r.mae * r.mae <= r.mse + 1e-15);
    CHECK(r.weight_entropy <= std::log(double(ws.n)) + 1e-12);
  }
}
