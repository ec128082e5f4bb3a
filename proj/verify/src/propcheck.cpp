#include "spirit/propcheck.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "spirit/data.hpp"
#include "spirit/error.hpp"
#include "spirit/eval.hpp"
#include "spirit/experiment.hpp"
#include "spirit/imputer.hpp"
#include "spirit/oracles.hpp"
#include "spirit/scorenet.hpp"
#include "spirit/synthetic.hpp"
#include "spirit/toys.hpp"
#include "spirit/transport.hpp"

namespace spirit::props {

namespace {

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  os.precision(6);
  (os << ... << args);
  return os.str();
}

PropertyResult pass(std::string detail = "ok") { return {"", true, std::move(detail), 0.0}; }
PropertyResult fail(std::string detail) { return {"", false, std::move(detail), 0.0}; }

bool bit_equal(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool matrices_bit_equal(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index k = 0; k < a.size(); ++k)
    if (!bit_equal(a.data()[k], b.data()[k])) return false;
  return true;
}

// Small masked synthetic window set used by the imputer properties.
WindowSet small_windows(std::uint64_t seed, std::size_t windows = 40, std::size_t t = 6, std::size_t d = 3, double p = 0.3) {
  SyntheticSpec spec;
  spec.windows = windows;
  spec.patch_length = t;
  spec.features = d;
  spec.seed = seed;
  const WindowSet base = standardize_and_window(generate_synthetic(spec), t);
  MaskSpec m;
  m.p_miss = p;
  m.seed = seed;
  return simulate_mcar(base, m);
}

DsmConfig tiny_dsm(std::uint64_t seed) {
  DsmConfig dsm;
  dsm.epochs = 2;
  dsm.hidden_dim = 8;
  dsm.batch_size = 16;
  dsm.seed = seed;
  return dsm;
}

SpiritConfig tiny_spirit(Variant v, std::uint64_t seed) {
  SpiritConfig cfg;
  cfg.variant = v;
  cfg.outer_rounds = 2;
  cfg.imp_iters = 5;
  cfg.seed = seed;
  return cfg;
}

constexpr Variant kIterative[] = {Variant::Spirit, Variant::SpiritDissipative, Variant::W2Uniform, Variant::LangevinUniform};
constexpr Variant kAllVariants[] = {Variant::Spirit, Variant::SpiritDissipative, Variant::W2Uniform, Variant::LangevinUniform,
                                    Variant::MeanImputation};

DiscreteMeasure random_measure(Rng& rng, std::size_t n, std::size_t d, double spread, bool uniform_weights) {
  RowMatrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < pts.size(); ++k) pts.data()[k] = spread * rng.normal();
  DiscreteMeasure m = DiscreteMeasure::uniform(std::move(pts));
  if (!uniform_weights) {
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights(i) = 0.1 + rng.uniform();
    m.weights /= m.weights.sum();
  }
  return m;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

PropertyResult timed(const std::string& name, const std::function<PropertyResult()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  PropertyResult r;
  try {
    r = body();
  } catch (const Error& e) {
    r = fail(cat("threw ", e.code(), ": ", e.what()));
  } catch (const std::exception& e) {
    r = fail(cat("threw: ", e.what()));
  }
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

PropertyResult simplex_invariants(std::uint64_t seed) {
  const WindowSet ws = small_windows(seed);
  Rng net_rng(seed, {1});
  const ScoreNetwork net = ScoreNetwork::initialize(ws.width(), 8, net_rng);
  const NetworkScore score(net);
  double worst_sum = 0.0;
  double worst_mean = 0.0;
  for (Variant v : {Variant::Spirit, Variant::SpiritDissipative}) {
    for (bool scaling : {false, true}) {
      SpiritConfig cfg = tiny_spirit(v, seed);
      cfg.weight_scaling = scaling;
      Rng rng(seed, {2});
      ParticleEnsemble ens = init_imputation(ws, cfg, rng);
      for (int it = 0; it < 30; ++it) {
        const Eigen::VectorXd tw = teleport_direction(score, ens, ws.mask);
        worst_mean = std::max(worst_mean, std::abs(ens.weights().dot(tw)));
        spirit_step(score, ens, ws, cfg, rng);
        const Eigen::VectorXd w = ens.weights();
        if (!w.allFinite() || (w.array() < 0.0).any()) return fail(cat("non-finite or negative weight at step ", it));
        worst_sum = std::max(worst_sum, std::abs(w.sum() - 1.0));
      }
    }
  }
  const bool ok = worst_sum <= 1e-9 && worst_mean <= 1e-12;
  return {"", ok, cat("max |sum w - 1| = ", worst_sum, ", max |sum w T_w| = ", worst_mean), 0.0};
}

PropertyResult teleport_weighted_mean_zero(std::uint64_t seed) {
  Rng rng(seed, {3});
  double worst = 0.0;
  for (std::size_t n : {1, 2, 7, 100, 1000}) {
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::VectorXd norms(static_cast<Eigen::Index>(n)), raw(static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < norms.size(); ++i) {
        norms(i) = 3.0 * rng.uniform();
        raw(i) = 4.0 * rng.normal();
      }
      const Eigen::VectorXd log_w = normalize_weights(raw);
      const Eigen::VectorXd tw = teleport_direction(norms, log_w);
      worst = std::max(worst, std::abs(log_w.array().exp().matrix().dot(tw)));
    }
  }
  return {"", worst <= 1e-12, cat("max |sum w T_w| = ", worst), 0.0};
}

PropertyResult normalization_shift_invariance(std::uint64_t seed) {
  Rng rng(seed, {4});
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(pick(rng, 1, 200)));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = 3.0 * rng.normal();
    const Eigen::VectorXd base = normalize_weights(x);
    for (double c : {500.0, -500.0, 1e-3}) {
      const Eigen::VectorXd shifted = normalize_weights((x.array() + c).matrix());
      worst = std::max(worst, (shifted - base).cwiseAbs().maxCoeff());
    }
  }
  return {"", worst <= 1e-12, cat("max |normalize(x + c) - normalize(x)| = ", worst), 0.0};
}

PropertyResult observed_entries_immutable(std::uint64_t seed) {
  const WindowSet ws = small_windows(seed);
  Rng net_rng(seed, {5});
  const ScoreNetwork net = ScoreNetwork::initialize(ws.width(), 8, net_rng);
  const NetworkScore score(net);
  auto observed_intact = [&](const RowMatrix& x) {
    for (Eigen::Index k = 0; k < x.size(); ++k)
      if (ws.mask.data()[k] == 0 && !bit_equal(x.data()[k], ws.obs.data()[k])) return false;
    return true;
  };
  for (Variant v : kIterative) {
    for (bool scaling : {false, true}) {
      SpiritConfig cfg = tiny_spirit(v, seed);
      cfg.weight_scaling = scaling;
      Rng rng(seed, {6});
      ParticleEnsemble ens = init_imputation(ws, cfg, rng);
      if (!observed_intact(ens.x_imp)) return fail(cat(to_string(v), ": observed entry changed by initialization"));
      for (int it = 0; it < 15; ++it) {
        spirit_step(score, ens, ws, cfg, rng);
        if (!observed_intact(ens.x_imp)) return fail(cat(to_string(v), ": observed entry changed at step ", it));
      }
    }
  }
  for (Variant v : kAllVariants) {
    const SpiritRun run = run_variant(ws, tiny_spirit(v, seed), tiny_dsm(seed));
    if (!observed_intact(run.imputed)) return fail(cat(to_string(v), ": observed entry changed in final imputation"));
    for (Eigen::Index k = 0; k < ws.raw.size(); ++k)
      if (ws.mask.data()[k] == 0 && !bit_equal(run.imputed_raw.data()[k], ws.raw.data()[k]))
        return fail(cat(to_string(v), ": raw export does not echo an observed value"));
  }
  return pass("observed entries bit-identical after every step, all variants");
}

PropertyResult energy_surrogate_monotone(std::uint64_t seed) {
  const ToyResult toy = run_gaussian_toy(ToySampler::Deterministic, seed);
  constexpr std::size_t burn_in = 10;
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t k = burn_in + 1; k < toy.energy.size(); ++k) {
    const double rise = toy.energy[k] - toy.energy[k - 1];
    if (rise > 1e-12 * std::max(1.0, std::abs(toy.energy[k - 1]))) {
      ++violations;
      worst = std::max(worst, rise);
    }
  }
  return {"", violations == 0,
          cat("energy ", toy.energy.front(), " -> ", toy.energy.back(), ", ", violations, " increases after burn-in (max ", worst, ")"),
          0.0};
}

PropertyResult mask_calibration(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.windows = 200;
  spec.features = 7;
  spec.seed = seed;
  const WindowSet base = standardize_and_window(generate_synthetic(spec), spec.patch_length);
  double worst = 0.0;
  for (double p : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
    MaskSpec m;
    m.p_miss = p;
    m.seed = seed;
    const WindowSet ws = simulate_mcar(base, m);
    for (std::size_t f : ws.anchor_features)
      for (std::size_t n = 0; n < ws.n; ++n)
        for (std::size_t t = 0; t < ws.t; ++t)
          if (ws.mask(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(WindowSet::column(t, f, ws.d))) != 0)
            return fail(cat("anchor feature ", f, " has a masked entry at p = ", p));
    worst = std::max(worst, std::abs(maskable_missing_ratio(ws) - p));
  }
  return {"", worst <= 0.005, cat("max |ratio - p_miss| = ", worst), 0.0};
}

PropertyResult standardize_roundtrip(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.windows = 30;
  spec.seed = seed;
  const RawSeries raw = generate_synthetic(spec);
  const WindowSet ws = standardize_and_window(raw, spec.patch_length);
  const RowMatrix back = inverse_standardize(standardize(raw.values, ws.norm), ws.norm);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < back.size(); ++k)
    worst = std::max(worst, std::abs(back.data()[k] - raw.values.data()[k]) / std::max(1.0, std::abs(raw.values.data()[k])));
  MaskSpec m;
  m.seed = seed;
  const WindowSet masked = simulate_mcar(ws, m);
  RowMatrix perturbed = masked.ideal.array() + 0.25;
  const RowMatrix exported = to_raw(masked, perturbed);
  for (Eigen::Index k = 0; k < exported.size(); ++k)
    if (masked.mask.data()[k] == 0 && !bit_equal(exported.data()[k], masked.raw.data()[k]))
      return fail("observed entry does not round-trip bit-exactly through to_raw");
  return {"", worst <= 1e-12, cat("max relative round-trip error = ", worst), 0.0};
}

PropertyResult windowing_partition(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.windows = 8;
  spec.patch_length = 5;
  spec.seed = seed;
  RawSeries raw = generate_synthetic(spec);
  // Drop three rows so the tail cannot fill a window.
  const Eigen::Index keep = raw.values.rows() - 3;
  raw.values.conservativeResize(keep, Eigen::NoChange);
  raw.timestamps.resize(static_cast<std::size_t>(keep));
  raw.time_index.resize(static_cast<std::size_t>(keep));
  const WindowSet ws = standardize_and_window(raw, 5);
  if (ws.n != 7) return fail(cat("expected 7 windows, got ", ws.n));
  const RowMatrix z = standardize(raw.values, ws.norm);
  for (std::size_t n = 0; n < ws.n; ++n)
    for (std::size_t t = 0; t < ws.t; ++t) {
      const auto row = static_cast<Eigen::Index>(n * ws.t + t);
      if (ws.timestamps[static_cast<std::size_t>(row)] != raw.timestamps[static_cast<std::size_t>(row)])
        return fail("timestamps out of order");
      for (std::size_t d = 0; d < ws.d; ++d)
        if (!bit_equal(ws.raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(WindowSet::column(t, d, ws.d))),
                       raw.values(row, static_cast<Eigen::Index>(d))))
          return fail(cat("window ", n, " step ", t, " is not row ", row));
    }
  return pass("7 disjoint windows cover the leading 35 rows in order");
}

PropertyResult mae_squared_le_mse(std::uint64_t seed) {
  Rng rng(seed, {7});
  double worst = -1.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = pick(rng, 1, 4), t = pick(rng, 1, 6), n = pick(rng, 1, 10);
    RowMatrix ideal(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t * d));
    RowMatrix imp(ideal.rows(), ideal.cols());
    MaskMatrix mask(ideal.rows(), ideal.cols());
    for (Eigen::Index k = 0; k < ideal.size(); ++k) {
      ideal.data()[k] = rng.normal();
      imp.data()[k] = ideal.data()[k] + 2.0 * rng.normal() * rng.uniform();
      mask.data()[k] = rng.uniform() < 0.4 ? 1 : 0;
    }
    mask.data()[0] = 1;
    const MetricsReport r = masked_mae_mse(ideal, imp, mask, d);
    worst = std::max(worst, r.mae * r.mae - r.mse);
    for (const auto& f : r.per_feature)
      if (f.n_evaluated > 0) worst = std::max(worst, f.mae * f.mae - f.mse);
  }
  return {"", worst <= 1e-15, cat("max (MAE^2 - MSE) = ", worst), 0.0};
}

PropertyResult layer_norm_statistics(std::uint64_t seed) {
  Rng rng(seed, {8});
  const ScoreNetwork net = ScoreNetwork::initialize(12, 16, rng);
  RowMatrix batch(32, 12);
  for (Eigen::Index k = 0; k < batch.size(); ++k) batch.data()[k] = 3.0 * rng.normal() + 1.0;
  const ScoreNetwork::Trace tr = net.forward_trace(batch);
  double worst_mean = 0.0, worst_var = 0.0;
  for (const Eigen::MatrixXd* xhat : {&tr.xhat1, &tr.xhat2}) {
    for (Eigen::Index b = 0; b < xhat->cols(); ++b) {
      const double mean = xhat->col(b).mean();
      const double var = (xhat->col(b).array() - mean).square().mean();
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_var = std::max(worst_var, std::abs(var - 1.0));
    }
  }
  return {"", worst_mean <= 1e-10 && worst_var <= 1e-6,
          cat("max |mean| = ", worst_mean, ", max |var - 1| = ", worst_var), 0.0};
}

PropertyResult dsm_oracle_zero(std::uint64_t seed, double target_sign) {
  // For a point mass the perturbed score is exactly -eps / sigma^2, so the
  // DSM objective of the true score is zero up to rounding.
  Rng rng(seed, {9});
  double worst = 0.0;
  for (bool weighting : {true, false}) {
    for (double sigma : {0.1, 0.5, 1.0}) {
      DsmConfig cfg;
      cfg.sigma = sigma;
      cfg.noise_weighting = weighting;
      const RowMatrix noise = draw_dsm_noise(16, 12, sigma, rng);
      const RowMatrix scores = -noise / (sigma * sigma);
      const double loss = detail::dsm_loss_from_scores_impl(scores, noise, cfg, target_sign);
      const double scale = weighting ? (noise / sigma).squaredNorm() / 16.0 : (noise / (sigma * sigma)).squaredNorm() / 16.0;
      worst = std::max(worst, loss / scale);
    }
  }
  return {"", worst <= 1e-12, cat("max DSM loss of the exact score (relative) = ", worst), 0.0};
}

PropertyResult determinism(std::uint64_t seed) {
  const WindowSet a = small_windows(seed);
  const WindowSet b = small_windows(seed);
  if (a.mask != b.mask || !matrices_bit_equal(a.ideal, b.ideal)) return fail("mask simulation differs under a fixed seed");

  const DsmConfig dsm = tiny_dsm(seed);
  auto train_once = [&]() {
    Rng init(seed, {10});
    Rng train(seed, {11});
    return train_dsm(ScoreNetwork::initialize(a.width(), dsm.hidden_dim, init, dsm.network_output_scale()), a.ideal, dsm, train);
  };
  const TrainResult t1 = train_once(), t2 = train_once();
  if (t1.loss_trace != t2.loss_trace) return fail("DSM loss trace differs under a fixed seed");
  for (std::size_t k = 0; k < kBlockCount; ++k)
    if (t1.net.params().blocks[k] != t2.net.params().blocks[k]) return fail(cat("trained block ", kBlockNames[k], " differs"));

  for (Variant v : {Variant::Spirit, Variant::SpiritDissipative, Variant::LangevinUniform}) {
    const SpiritRun r1 = run_variant(a, tiny_spirit(v, seed), dsm);
    const SpiritRun r2 = run_variant(a, tiny_spirit(v, seed), dsm);
    if (!matrices_bit_equal(r1.imputed, r2.imputed)) return fail(cat(to_string(v), ": imputation differs under a fixed seed"));
    if (r1.trace.records.size() != r2.trace.records.size()) return fail(cat(to_string(v), ": trace length differs"));
    for (std::size_t k = 0; k < r1.trace.records.size(); ++k)
      if (!bit_equal(r1.trace.records[k].mae, r2.trace.records[k].mae) ||
          !bit_equal(r1.trace.records[k].dsm_loss, r2.trace.records[k].dsm_loss))
        return fail(cat(to_string(v), ": trace record ", k, " differs"));
  }
  return pass("masks, training and runs are bit-identical across repeats");
}

PropertyResult plan_feasibility(std::uint64_t seed) {
  Rng rng(seed, {12});
  double worst_row = 0.0, worst_balanced = 0.0, worst_brute = 0.0, worst_product = -1.0;
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = pick(rng, 1, 6), m = pick(rng, 1, 6);
    const DiscreteMeasure mu = random_measure(rng, n, 2, 1.0, rep % 2 == 0);
    const DiscreteMeasure nu = random_measure(rng, m, 2, 1.5, rep % 3 == 0);
    SptSolverConfig cfg;
    const TransportResult s = spt(mu, nu, cfg);
    if ((s.plan.plan.array() < 0.0).any()) return fail("negative SPT plan entry");
    worst_row = std::max(worst_row, (s.plan.plan.rowwise().sum() - mu.weights).cwiseAbs().maxCoeff());
    // The product coupling is feasible with zero KL penalty.
    const Eigen::MatrixXd cost = squared_euclidean_cost(mu.points, nu.points);
    const double product = (mu.weights.transpose() * cost * nu.weights)(0, 0);
    worst_product = std::max(worst_product, s.value - product - cfg.epsilon * std::log(static_cast<double>(std::max<std::size_t>(m, 2))));

    const TransportResult w = w2_exact(mu, nu);
    if ((w.plan.plan.array() < -1e-15).any()) return fail("negative W2 plan entry");
    worst_balanced = std::max({worst_balanced, (w.plan.plan.rowwise().sum() - mu.weights).cwiseAbs().maxCoeff(),
                               (w.plan.plan.colwise().sum().transpose() - nu.weights).cwiseAbs().maxCoeff()});
    const DiscreteMeasure sq = random_measure(rng, n, 2, 1.0, true);
    const DiscreteMeasure tq = random_measure(rng, n, 2, 1.0, true);
    worst_brute = std::max(worst_brute, std::abs(w2_exact(sq, tq).value - oracle::w2_bruteforce(sq, tq)));
  }
  const bool ok = worst_row <= 1e-9 && worst_balanced <= 1e-12 && worst_brute <= 1e-12 && worst_product <= 0.0;
  return {"", ok,
          cat("spt row marginal err ", worst_row, ", W2 marginal err ", worst_balanced, ", W2 vs brute force ", worst_brute,
              ", spt - product bound ", worst_product),
          0.0};
}

PropertyResult config_roundtrip(std::uint64_t seed) {
  Rng rng(seed, {13});
  for (int rep = 0; rep < 25; ++rep) {
    ExperimentConfig c;
    c.dataset = rep % 2 ? std::string(kSyntheticDataset) : "data/ETTh1.csv";
    if (rep % 3 == 0) c.schema = {"date", "HUFL", "OT"};
    c.patch_length = pick(rng, 1, 48);
    c.synthetic.patch_length = c.patch_length;
    c.p_miss = {0.05 + 0.9 * rng.uniform(), 0.1 + 0.3 * rng.uniform()};
    c.seeds = {rng() % 1000, rng()};
    c.variants = {Variant::Spirit, kAllVariants[pick(rng, 0, 4)]};
    c.max_parallel = pick(rng, 0, 8);
    c.spirit.eta = rng.uniform() * 0.01 + 1e-5;
    c.spirit.outer_rounds = pick(rng, 1, 9);
    c.spirit.imp_iters = pick(rng, 1, 500);
    c.spirit.weight_scaling = rng.uniform() < 0.5;
    c.spirit.init_mode = static_cast<InitMode>(pick(rng, 0, 2));
    c.spirit.teleport_sign_flip = rng.uniform() < 0.5;
    c.dsm.sigma = 0.01 + rng.uniform();
    c.dsm.learning_rate = 1e-4 + 1e-2 * rng.uniform();
    c.dsm.epochs = pick(rng, 0, 100);
    c.dsm.batch_size = pick(rng, 1, 256);
    c.dsm.hidden_dim = pick(rng, 1, 512);
    c.dsm.noise_weighting = rng.uniform() < 0.5;
    c.mask.anchor_fraction = 0.05 + 0.9 * rng.uniform();
    c.mask.bias_tolerance = 1e-4 + 1e-2 * rng.uniform();
    c.synthetic.windows = pick(rng, 1, 900);
    c.synthetic.features = pick(rng, 1, 9);
    c.synthetic.seed = rng();
    c.synthetic.latent_ar = 2.0 * rng.uniform() - 1.0;
    c.synthetic.noise_ar = 2.0 * rng.uniform() - 1.0;
    c.synthetic.noise_std = rng.uniform();
    const ExperimentConfig back = config_from_json(nlohmann::json::parse(to_json(c).dump()));
    if (!(back == c)) return fail(cat("config ", rep, " does not round-trip: ", to_json(c).dump()));
  }
  return pass("25 random configs round-trip through JSON text");
}

TransportOracleStats transport_oracle_sweep(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed, {14});
  TransportOracleStats st;
  const SptSolverConfig cfg;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = pick(rng, 1, 4), m = pick(rng, 1, 4);
    const double spread = 0.5 + 1.5 * rng.uniform();
    const DiscreteMeasure mu = random_measure(rng, n, 2, spread, k % 4 == 0);
    const DiscreteMeasure nu = random_measure(rng, m, 2, spread, k % 4 == 0);
    const double allowed = std::max(1e-4, 3.0 * cfg.epsilon * std::log(static_cast<double>(n * m)));
    const double s = spt(mu, nu, cfg).value;
    const oracle::SptOracleResult o = oracle::spt_oracle(mu, nu);
    const double diff = std::abs(s - o.value);
    st.worst_oracle_gap = std::max(st.worst_oracle_gap, diff / allowed);
    if (diff > allowed || !o.converged) ++st.oracle_failures;
    if (s > w2_exact(mu, nu).value + allowed) ++st.dominance_failures;
    const double self = spt(mu, mu, cfg).value;
    if (self > 2.0 * cfg.epsilon * std::log(static_cast<double>(n)) + 1e-12) ++st.self_failures;
    ++st.instances;
  }
  return st;
}

PropertyResult transport_oracles(std::size_t instances, std::uint64_t seed) {
  const TransportOracleStats st = transport_oracle_sweep(instances, seed);
  const bool ok = st.oracle_failures == 0 && st.dominance_failures == 0 && st.self_failures == 0;
  return {"", ok,
          cat(st.instances, " instances: oracle failures ", st.oracle_failures, " (worst |spt - oracle| / tol = ", st.worst_oracle_gap,
              "), spt > W2 on ", st.dominance_failures, ", spt(mu, mu) over bound on ", st.self_failures),
          0.0};
}

ContaminationSweepStats contamination_bound_sweep(std::size_t measures, std::uint64_t seed) {
  Rng rng(seed, {15});
  ContaminationSweepStats st;
  st.worst_bound_slack = std::numeric_limits<double>::infinity();
  const std::vector<double> radii{2.0, 5.0, 10.0, 50.0, 100.0};
  const SptSolverConfig cfg;
  ContaminationSpec spec;
  spec.zeta = 0.1;
  spec.z = -Eigen::Vector2d(1.0, 1.0).normalized();  // away from the unit box
  for (std::size_t k = 0; k < measures; ++k) {
    auto box_measure = [&](std::size_t n) {
      RowMatrix pts(static_cast<Eigen::Index>(n), 2);
      for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform();
      DiscreteMeasure m = DiscreteMeasure::uniform(std::move(pts));
      if (rng.uniform() < 0.5) {
        for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights(i) = 0.1 + rng.uniform();
        m.weights /= m.weights.sum();
      }
      return m;
    };
    const DiscreteMeasure mu = box_measure(pick(rng, 1, 6));
    const DiscreteMeasure nu = box_measure(pick(rng, 1, 6));
    const double base = spt(mu, nu, cfg).value;
    const auto rows = robustness_bench(mu, nu, spec, radii, cfg);
    // The solver may overshoot the exact minimum by eps log(m + 1).
    const double solver_tol = cfg.epsilon * std::log(static_cast<double>(nu.size() + 1));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      st.worst_bound_slack = std::min(st.worst_bound_slack, rows[r].bound - rows[r].spt);
      if (rows[r].spt > rows[r].bound + solver_tol) ++st.bound_violations;
      if (r > 0 && !(rows[r].w2 > rows[r - 1].w2)) ++st.monotonicity_violations;
    }
    const double big = radii.back();
    if (!(rows.back().w2 > spec.zeta * big * big - base)) ++st.growth_violations;
    ++st.measures;
  }
  return st;
}

PropertyResult contamination_bound(std::size_t measures, std::uint64_t seed) {
  const ContaminationSweepStats st = contamination_bound_sweep(measures, seed);
  const bool ok = st.bound_violations == 0 && st.monotonicity_violations == 0 && st.growth_violations == 0;
  return {"", ok,
          cat(st.measures, " measures x 5 radii: bound violations ", st.bound_violations, " (min slack ", st.worst_bound_slack,
              "), W2 non-increasing steps ", st.monotonicity_violations, ", growth failures ", st.growth_violations),
          0.0};
}

GradcheckStats gradcheck_sweep(std::size_t networks, std::uint64_t seed, double target_sign) {
  GradcheckStats st;
  for (std::size_t k = 0; k < networks; ++k) {
    Rng rng(seed, {16, k});
    DsmConfig cfg;
    cfg.sigma = k % 3 == 0 ? 0.1 : 0.5;
    cfg.noise_weighting = k % 2 == 0;
    ScoreNetwork net = ScoreNetwork::initialize(12, 8, rng, cfg.network_output_scale());
    // Nonzero biases and LN affine parameters so every block carries signal.
    for (Block b : {Block::B1, Block::B2, Block::B3, Block::Ln1Shift, Block::Ln2Shift})
      for (Eigen::Index e = 0; e < net.params()[b].size(); ++e) net.params()[b].data()[e] = 0.3 * rng.normal();
    for (Block b : {Block::Ln1Scale, Block::Ln2Scale})
      for (Eigen::Index e = 0; e < net.params()[b].size(); ++e) net.params()[b].data()[e] = 1.0 + 0.3 * rng.normal();
    RowMatrix batch(6, 12);
    for (Eigen::Index e = 0; e < batch.size(); ++e) batch.data()[e] = rng.normal();
    const RowMatrix noise = draw_dsm_noise(6, 12, cfg.sigma, rng);
    const GradCheckReport rep = oracle::gradient_check(net, batch, noise, cfg, 1e-4, target_sign);
    if (rep.max_relative_error >= st.worst_relative_error) {
      st.worst_relative_error = rep.max_relative_error;
      st.worst_block = rep.worst_block;
    }
    ++st.networks;
  }
  return st;
}

std::vector<PropertyResult> run_gradcheck_suite(std::size_t networks, std::uint64_t seed) {
  return {timed("dsm_gradients_match_finite_differences", [&] {
    const GradcheckStats st = gradcheck_sweep(networks, seed);
    return PropertyResult{"", st.worst_relative_error <= 1e-4,
                          cat(st.networks, " networks, max relative error ", st.worst_relative_error, " (", st.worst_block, ")"),
                          0.0};
  })};
}

std::vector<PropertyResult> run_property_suite(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  out.push_back(timed("simplex_invariants", [&] { return simplex_invariants(seed); }));
  out.push_back(timed("teleport_weighted_mean_zero", [&] { return teleport_weighted_mean_zero(seed); }));
  out.push_back(timed("normalization_shift_invariance", [&] { return normalization_shift_invariance(seed); }));
  out.push_back(timed("observed_entries_immutable", [&] { return observed_entries_immutable(seed); }));
  out.push_back(timed("energy_surrogate_monotone", [&] { return energy_surrogate_monotone(seed); }));
  out.push_back(timed("mae_squared_le_mse", [&] { return mae_squared_le_mse(seed); }));
  out.push_back(timed("mask_calibration", [&] { return mask_calibration(seed); }));
  out.push_back(timed("standardize_roundtrip", [&] { return standardize_roundtrip(seed); }));
  out.push_back(timed("windowing_partition", [&] { return windowing_partition(seed); }));
  out.push_back(timed("layer_norm_statistics", [&] { return layer_norm_statistics(seed); }));
  out.push_back(timed("dsm_oracle_zero", [&] { return dsm_oracle_zero(seed); }));
  out.push_back(timed("determinism", [&] { return determinism(seed); }));
  out.push_back(timed("plan_feasibility", [&] { return plan_feasibility(seed); }));
  out.push_back(timed("config_roundtrip", [&] { return config_roundtrip(seed); }));
  out.push_back(timed("transport_oracles", [&] { return transport_oracles(100, seed); }));
  out.push_back(timed("contamination_bound", [&] { return contamination_bound(200, seed); }));
  for (auto& r : run_gradcheck_suite(20, seed)) out.push_back(std::move(r));
  return out;
}

}  // namespace spirit::props
