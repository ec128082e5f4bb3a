#include <benchmark/benchmark.h>

#include "spirit/data.hpp"
#include "spirit/imputer.hpp"
#include "spirit/scorenet.hpp"
#include "spirit/synthetic.hpp"
#include "spirit/transport.hpp"

using namespace spirit;

namespace {

DiscreteMeasure random_measure(Eigen::Index n, Eigen::Index d, Rng& rng) {
  RowMatrix pts(n, d);
  for (Eigen::Index k = 0; k < pts.size(); ++k) pts.data()[k] = rng.normal();
  return DiscreteMeasure::uniform(std::move(pts));
}

WindowSet masked_windows(std::size_t windows) {
  const WindowSet base = standardize_and_window(generate_synthetic(SyntheticSpec{.windows = windows}), 24);
  return simulate_mcar(base, MaskSpec{});
}

}  // namespace

static void BM_Spt(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const DiscreteMeasure mu = random_measure(n, 4, rng), nu = random_measure(n, 4, rng);
  for (auto _ : state) benchmark::DoNotOptimize(spt(mu, nu).value);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Spt)->RangeMultiplier(2)->Range(4, 32)->Unit(benchmark::kMillisecond)->Complexity();

static void BM_W2Exact(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const DiscreteMeasure mu = random_measure(n, 4, rng), nu = random_measure(n, 4, rng);
  for (auto _ : state) benchmark::DoNotOptimize(w2_exact(mu, nu).value);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_W2Exact)->RangeMultiplier(2)->Range(8, 64)->Complexity();  // exact solver caps n*m at 4096

static void BM_ScoreForward(benchmark::State& state) {
  Rng rng(3);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const ScoreNetwork net = ScoreNetwork::initialize(96, hidden, rng);
  RowMatrix batch(64, 96);
  for (Eigen::Index k = 0; k < batch.size(); ++k) batch.data()[k] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(batch).data());
  state.SetItemsProcessed(state.iterations() * batch.rows());
}
BENCHMARK(BM_ScoreForward)->Arg(64)->Arg(256);

static void BM_DsmLossAndGrad(benchmark::State& state) {
  Rng rng(4);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const ScoreNetwork net = ScoreNetwork::initialize(96, hidden, rng);
  RowMatrix batch(64, 96);
  for (Eigen::Index k = 0; k < batch.size(); ++k) batch.data()[k] = rng.normal();
  const DsmConfig cfg;
  const RowMatrix noise = draw_dsm_noise(64, 96, cfg.sigma, rng);
  for (auto _ : state) benchmark::DoNotOptimize(dsm_loss_and_grad(net, batch, noise, cfg).loss);
  state.SetItemsProcessed(state.iterations() * batch.rows());
}
BENCHMARK(BM_DsmLossAndGrad)->Arg(64)->Arg(256);

static void BM_SpiritStep(benchmark::State& state) {
  const WindowSet ws = masked_windows(static_cast<std::size_t>(state.range(0)));
  SpiritConfig cfg;
  cfg.weight_scaling = false;
  Rng rng(5);
  const ScoreNetwork net = ScoreNetwork::initialize(ws.width(), 256, rng);
  const NetworkScore score(net);
  ParticleEnsemble ens = init_imputation(ws, cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(spirit_step(score, ens, ws, cfg, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SpiritStep)->Arg(100)->Arg(500);

static void BM_SimulateMcar(benchmark::State& state) {
  const WindowSet base = standardize_and_window(
      generate_synthetic(SyntheticSpec{.windows = static_cast<std::size_t>(state.range(0))}), 24);
  MaskSpec spec;
  for (auto _ : state) {
    ++spec.seed;
    benchmark::DoNotOptimize(simulate_mcar(base, spec).mask.data());
  }
}
BENCHMARK(BM_SimulateMcar)->Arg(500)->Arg(725);

BENCHMARK_MAIN();
