#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "spirit/error.hpp"
#include "spirit/experiment.hpp"

using namespace spirit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spirit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.output_dir = out.string();
  cfg.patch_length = 6;
  cfg.synthetic.patch_length = 6;
  cfg.synthetic.windows = 20;
  cfg.synthetic.features = 3;
  cfg.spirit.outer_rounds = 2;
  cfg.spirit.imp_iters = 5;
  cfg.spirit.weight_scaling = false;
  cfg.dsm.epochs = 2;
  cfg.dsm.hidden_dim = 8;
  cfg.max_parallel = 4;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& err_file) {
  const std::string cmd = std::string(SPIRIT_CLI_PATH) + " " + args + " >/dev/null 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("shipped defaults hold the reference hyperparameters") {
  const ExperimentConfig cfg = load_config(fs::path(SPIRIT_SOURCE_DIR) / "configs" / "defaults.json");
  CHECK(cfg.spirit.eta == 0.002);
  CHECK(cfg.dsm.learning_rate == 0.001);
  CHECK(cfg.dsm.hidden_dim == 256);
  CHECK(cfg.patch_length == 24);
  CHECK(cfg.dsm.sigma == 0.1);
  CHECK(cfg.p_miss == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  for (const char* name : {"synthetic.json", "etth1.json", "ablation.json"})
    CHECK_NOTHROW(load_config(fs::path(SPIRIT_SOURCE_DIR) / "configs" / name));
}

TEST_CASE("config json round-trip and strictness") {
  ExperimentConfig cfg = tiny_config("out");
  cfg.variants = {Variant::Spirit, Variant::W2Uniform};
  cfg.p_miss = {0.1, 0.45};
  CHECK(config_from_json(json::parse(to_json(cfg).dump())) == cfg);

  json bad = to_json(cfg);
  bad["spirit"]["etaa"] = 0.1;
  CHECK_THROWS_AS(config_from_json(bad), InputError);
  bad = to_json(cfg);
  bad["dsm"]["sigma"] = "large";
  CHECK_THROWS_AS(config_from_json(bad), InputError);
  bad = to_json(cfg);
  bad["p_miss"] = json::array({1.5});
  CHECK_THROWS_AS(config_from_json(bad), InputError);
}

TEST_CASE("seed environment variable overrides the seed list") {
  const fs::path dir = scratch("env");
  std::ofstream(dir / "c.json") << to_json(tiny_config(dir)).dump();
  ::setenv(kSeedEnvVar, "41", 1);
  CHECK(load_config(dir / "c.json").seeds == std::vector<std::uint64_t>{41});
  ::setenv(kSeedEnvVar, "x1", 1);
  CHECK_THROWS_AS(load_config(dir / "c.json"), InputError);
  ::unsetenv(kSeedEnvVar);
  CHECK(load_config(dir / "c.json").seeds == std::vector<std::uint64_t>{0});
}

TEST_CASE("impute writes one artifact triple per grid cell and is reproducible") {
  const fs::path dir = scratch("grid");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.p_miss = {0.1, 0.3, 0.5};
  cfg.seeds = {0, 1, 2};
  const auto reports = cmd_impute(cfg);
  CHECK(reports.size() == 9);
  std::set<std::string> stems;
  for (const auto& r : reports) stems.insert(cell_stem(r.p_miss, r.seed, r.variant));
  CHECK(stems.size() == 9);
  std::size_t report_files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (n.ends_with(".report.json")) ++report_files;
    CHECK_FALSE(n.ends_with(".tmp"));
  }
  CHECK(report_files == 9);
  CHECK(selfcheck(dir).empty());

  const std::string stem = cell_stem(0.3, 1, Variant::Spirit);
  json first = json::parse(slurp(dir / (stem + ".report.json")));
  cmd_impute(cfg);
  json second = json::parse(slurp(dir / (stem + ".report.json")));
  first.erase("runtime_s");
  second.erase("runtime_s");
  CHECK(first == second);
  CHECK(slurp(dir / (stem + ".trace.jsonl")).size() > 0);

  // The config echo reparses to the config that produced it.
  CHECK(config_from_json(first.at("config")) == cfg);
}

TEST_CASE("variants share masks so their errors pair up") {
  const fs::path dir = scratch("pairs");
  ExperimentConfig cfg = tiny_config(dir);
  const WindowSet base = prepare_windows(cfg);
  const RunReport a = run_cell(cfg, base, 0.3, 4, Variant::Spirit);
  const RunReport b = run_cell(cfg, base, 0.3, 4, Variant::MeanImputation);
  CHECK(a.metrics.n_evaluated == b.metrics.n_evaluated);
  CHECK(a.window_mae.size() == b.window_mae.size());
}

TEST_CASE("missing dataset is an input error") {
  ExperimentConfig cfg = tiny_config(scratch("missing"));
  cfg.dataset = "/nonexistent/ETTh1.csv";
  try {
    cmd_impute(cfg);
    FAIL("expected dataset_not_found");
  } catch (const Error& e) {
    CHECK(e.code() == "dataset_not_found");
    CHECK(e.exit_code() == 2);
  }
}

TEST_CASE("cli reports errors as JSON with stable exit codes") {
  const fs::path dir = scratch("cli");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.dataset = "/nonexistent/ETTh1.csv";
  std::ofstream(dir / "missing.json") << to_json(cfg).dump();
  CHECK(run_cli("impute --config " + (dir / "missing.json").string(), dir / "err.txt") == 2);
  const json err = json::parse(slurp(dir / "err.txt"));
  CHECK(err.at("error") == "dataset_not_found");
  CHECK(err.at("exit_code") == 2);

  std::ofstream(dir / "broken.json") << "{\"dataset\": ";
  CHECK(run_cli("impute --config " + (dir / "broken.json").string(), dir / "err2.txt") == 2);
  CHECK(json::parse(slurp(dir / "err2.txt")).at("error") == "parse_error");

  CHECK(run_cli("toy-transport --out " + (dir / "toy").string(), dir / "err3.txt") == 0);
  CHECK(run_cli("selfcheck " + (dir / "toy").string(), dir / "err4.txt") == 0);
}

TEST_CASE("bench deltas and table layout") {
  // 0.573 against 0.209 is reported as a 173% degradation.
  CHECK(delta_percent(0.573, 0.209) == doctest::Approx(174.16).epsilon(1e-4));
  CHECK(std::abs(delta_percent(0.573, 0.209) - 173.0) < 1.5);

  const fs::path dir = scratch("bench");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.variants = {Variant::Spirit};
  CHECK_THROWS_AS(cmd_bench(cfg), InputError);

  cfg.p_miss = {0.2, 0.4};
  const BenchSummary single = cmd_bench(cfg);
  CHECK_FALSE(single.has_comparison);
  REQUIRE(single.rows.size() == 1);
  CHECK(single.rows[0].cells == 2);
  CHECK_FALSE(single.rows[0].delta_mae_pct.has_value());
  const std::string csv = slurp(dir / "bench.csv");
  CHECK(csv.rfind("variant,mae,mse,cells\n", 0) == 0);

  cfg.p_miss = {0.3};
  cfg.variants = {Variant::Spirit, Variant::MeanImputation};
  const BenchSummary pair = cmd_bench(cfg);
  CHECK(pair.has_comparison);
  REQUIRE(pair.rows.size() == 2);
  CHECK(pair.rows[1].t_test.has_value());
  CHECK(slurp(dir / "bench.csv").find("delta_mae_pct") != std::string::npos);
  CHECK(format_bench_table(pair).find("mean_imputation") != std::string::npos);
}

TEST_CASE("mean imputation degrades against spirit on the synthetic benchmark") {
  const fs::path dir = scratch("bench_ordering");
  ExperimentConfig cfg;
  cfg.output_dir = dir.string();
  // Too few windows or too small a network and the learned score loses to the mean.
  cfg.synthetic.windows = 500;
  cfg.spirit.weight_scaling = false;
  cfg.spirit.outer_rounds = 3;
  cfg.spirit.imp_iters = 100;
  cfg.dsm.epochs = 30;
  cfg.dsm.hidden_dim = 64;
  cfg.variants = {Variant::Spirit, Variant::MeanImputation};
  const BenchSummary s = cmd_bench(cfg);
  REQUIRE(s.rows.size() == 2);
  REQUIRE(s.rows[1].delta_mae_pct.has_value());
  CHECK(*s.rows[1].delta_mae_pct > 0.0);
}

TEST_CASE("toy exports parse back into their schemas") {
  const fs::path dir = scratch("toys");
  const auto t = cmd_toy_transport(3, dir);
  const auto d = cmd_toy_dissipative(3, dir);
  CHECK(t.files.size() == 4);
  CHECK(d.files.size() == 4);
  CHECK(selfcheck(dir).empty());
  CHECK(slurp(dir / "toy_dissipative.csv").rfind("sampler,median_x1,median_x2,mode_x1,mode_x2,median_to_mode,spread_std\n", 0) == 0);
  const json summary = json::parse(slurp(dir / "toy_transport.json"));
  CHECK(summary.at("spt_outlier_mass").get<double>() < summary.at("ot_outlier_mass").get<double>());

  // A corrupted artifact is reported.
  std::ofstream(dir / "ot_plan.csv") << "i,j\n1,2\n";
  CHECK_FALSE(selfcheck(dir).empty());
}

TEST_CASE("mask export for the first grid cell") {
  const fs::path dir = scratch("mask");
  const fs::path p = cmd_mask(tiny_config(dir), MaskFormat::Triples);
  CHECK(fs::exists(p));
  CHECK(slurp(p).rfind("window,step,feature\n", 0) == 0);
  CHECK(selfcheck(dir).empty());
}
