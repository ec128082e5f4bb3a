#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spirit/data.hpp"
#include "spirit/eval.hpp"
#include "spirit/imputer.hpp"
#include "spirit/scorenet.hpp"
#include "spirit/synthetic.hpp"
#include "spirit/toys.hpp"
#include "spirit/transport.hpp"

namespace spirit {

/// Dataset keyword that selects the in-memory synthetic generator instead of a CSV path.
inline constexpr const char* kSyntheticDataset = "synthetic";
inline constexpr const char* kSeedEnvVar = "SPIRIT_SEED";

struct ExperimentConfig {
  std::string dataset = kSyntheticDataset;
  std::vector<std::string> schema;  // expected CSV columns; empty accepts any
  std::size_t patch_length = 24;
  std::vector<double> p_miss{0.3};
  std::vector<std::uint64_t> seeds{0};
  std::vector<Variant> variants{Variant::Spirit};
  std::string output_dir = "runs";
  std::size_t max_parallel = 0;  // 0 = hardware concurrency
  SpiritConfig spirit;
  DsmConfig dsm;
  MaskSpec mask;
  SyntheticSpec synthetic;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Keys missing from `j` keep the values of `base`; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, const ExperimentConfig& base = {});
/// Reads a JSON config; SPIRIT_SEED (if set) replaces the seed list.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Loads (or generates) the dataset and windows it, without a mask.
WindowSet prepare_windows(const ExperimentConfig& cfg);

struct RunReport {
  std::string dataset;
  double p_miss = 0.0;
  std::uint64_t seed = 0;
  Variant variant = Variant::Spirit;
  MetricsReport metrics;
  std::vector<double> window_mae;
  EnergyTrace trace;
  double runtime_s = 0.0;
  nlohmann::json config_echo;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const RunReport& r);

/// One grid cell: mask with (seed, p_miss), impute with `variant`. The mask
/// depends only on (seed, p_miss), so variants share masks and pair up.
RunReport run_cell(const ExperimentConfig& cfg, const WindowSet& base, double p_miss, std::uint64_t seed, Variant variant,
                   SpiritRun* keep = nullptr, const TraceSink& sink = {});

std::string cell_stem(double p_miss, std::uint64_t seed, Variant variant);

/// Runs the full grid and writes report/trace/imputed files per cell.
std::vector<RunReport> cmd_impute(const ExperimentConfig& cfg);

struct BenchRow {
  Variant variant = Variant::Spirit;
  double mae = 0.0;
  double mse = 0.0;
  std::size_t cells = 0;
  std::optional<double> delta_mae_pct;
  std::optional<double> delta_mse_pct;
  std::optional<PairedTestResult> t_test;  // per-window MAE, variant vs spirit
};

struct BenchSummary {
  std::vector<BenchRow> rows;
  bool has_comparison = false;
};

/// Degradation in percent relative to the reference: (x - ref) / ref * 100.
double delta_percent(double value, double reference);

BenchSummary aggregate_bench(const std::vector<RunReport>& reports);
std::string format_bench_table(const BenchSummary& s);
void write_bench_summary_csv(const BenchSummary& s, std::ostream& out);
BenchSummary cmd_bench(const ExperimentConfig& cfg);

struct ToyTransportOutput {
  ToyMatching toy;
  std::vector<std::filesystem::path> files;
};
ToyTransportOutput cmd_toy_transport(std::uint64_t seed, const std::filesystem::path& out_dir);

struct ToyDissipativeOutput {
  std::vector<ToyResult> results;
  std::vector<std::filesystem::path> files;
};
ToyDissipativeOutput cmd_toy_dissipative(std::uint64_t seed, const std::filesystem::path& out_dir);

/// Writes the mask of the first (p_miss, seed) cell.
std::filesystem::path cmd_mask(const ExperimentConfig& cfg, MaskFormat format);

/// Validates every artifact under `dir` against its declared schema. Returns
/// one problem description per violation (empty means all files conform).
std::vector<std::string> selfcheck(const std::filesystem::path& dir);

/// Temp-file-then-rename write.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace spirit
