// End-to-end acceptance run: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "spirit/error.hpp"
#include "spirit/eval.hpp"
#include "spirit/experiment.hpp"
#include "spirit/propcheck.hpp"
#include "spirit/toys.hpp"

using namespace spirit;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool passed = false;
  bool soft = false;
  bool skipped = false;
  std::string detail;
};

struct Clock {
  std::clock_t cpu0 = std::clock();
  std::chrono::steady_clock::time_point wall0 = std::chrono::steady_clock::now();
  double cpu() const { return double(std::clock() - cpu0) / CLOCKS_PER_SEC; }
  double wall() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count(); }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

int hard_failures = 0;

void run(int id, const std::string& title, double cpu_limit_s, const std::function<Verdict()>& body) {
  const Clock clk;
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.passed = false;
    v.detail = std::string("threw: ") + e.what();
  }
  const double cpu = clk.cpu();
  const bool in_time = cpu < cpu_limit_s;
  const bool ok = v.passed && in_time;
  std::string tag = v.skipped ? "SKIP" : ok ? "PASS" : (v.soft ? "SOFT-FAIL" : "FAIL");
  std::cout << "[" << tag << "] criterion " << id << " (" << title << "): " << v.detail << "; cpu " << fmt(cpu, 3) << " s"
            << (in_time ? "" : " exceeds limit " + fmt(cpu_limit_s, 3) + " s") << ", wall " << fmt(clk.wall(), 3) << " s"
            << std::endl;
  if (!ok && !v.soft && !v.skipped) ++hard_failures;
}

fs::path source_path(const std::string& rel) { return fs::path(SPIRIT_SOURCE_DIR) / rel; }

// Criterion 6's runs are reused by criterion 8.
struct SyntheticRuns {
  RunReport spirit, mean, langevin;
  bool done = false;
} synthetic_runs;

}  // namespace

int main() {
  std::cout << "SPIRIT acceptance suite" << std::endl;
  const std::uint64_t seed = 0;

  run(1, "property suite", 120.0, [&] {
    using namespace props;
    std::vector<PropertyResult> rs;
    rs.push_back(timed("simplex_invariants", [&] { return simplex_invariants(seed); }));
    rs.push_back(timed("teleport_weighted_mean_zero", [&] { return teleport_weighted_mean_zero(seed); }));
    rs.push_back(timed("observed_entries_immutable", [&] { return observed_entries_immutable(seed); }));
    rs.push_back(timed("normalization_shift_invariance", [&] { return normalization_shift_invariance(seed); }));
    rs.push_back(timed("mae_squared_le_mse", [&] { return mae_squared_le_mse(seed); }));
    rs.push_back(timed("mask_calibration", [&] { return mask_calibration(seed); }));
    rs.push_back(timed("determinism", [&] { return determinism(seed); }));
    Verdict v{true, false, false, ""};
    std::size_t passed = 0;
    for (const auto& r : rs) {
      if (r.passed) ++passed;
      else v.detail += r.name + " failed (" + r.detail + "); ";
    }
    v.passed = passed == rs.size();
    v.detail += std::to_string(passed) + "/" + std::to_string(rs.size()) + " properties hold";
    return v;
  });

  run(2, "DSM gradient oracle", 60.0, [&] {
    const props::GradcheckStats st = props::gradcheck_sweep(20, seed);
    return Verdict{st.worst_relative_error < 1e-4, false, false,
                   std::to_string(st.networks) + " networks (H = 8), max relative error " + fmt(st.worst_relative_error) +
                       " in " + st.worst_block + " (limit 1e-4)"};
  });

  run(3, "transport oracles", 120.0, [&] {
    const props::TransportOracleStats st = props::transport_oracle_sweep(100, seed);
    const bool ok = st.oracle_failures == 0 && st.dominance_failures == 0 && st.self_failures == 0;
    return Verdict{ok, false, false,
                   std::to_string(st.instances) + " instances; oracle mismatches " + std::to_string(st.oracle_failures) +
                       " (worst |spt - oracle| at " + fmt(st.worst_oracle_gap) + " of tolerance), spt > W2 on " +
                       std::to_string(st.dominance_failures) + ", spt(mu, mu) above 2 eps log n on " +
                       std::to_string(st.self_failures)};
  });

  run(4, "contamination bound sweep", 180.0, [&] {
    const props::ContaminationSweepStats st = props::contamination_bound_sweep(200, seed);
    const bool ok = st.bound_violations == 0 && st.monotonicity_violations == 0 && st.growth_violations == 0;
    return Verdict{ok, false, false,
                   std::to_string(st.measures) + " base measures x radii {2, 5, 10, 50, 100}; bound violations " +
                       std::to_string(st.bound_violations) + " (min slack " + fmt(st.worst_bound_slack) +
                       "), W2 non-increasing steps " + std::to_string(st.monotonicity_violations) +
                       ", W2 below 0.1 |z|^2 - S at |z| = 100: " + std::to_string(st.growth_violations)};
  });

  run(5, "2-D dissipative toy", 60.0, [&] {
    const GaussianToySpec spec;
    double worst_det = 0.0, worst_spread = 0.0;
    int wiener_farther = 0, spread_ok = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const ToyResult det = run_gaussian_toy(ToySampler::Deterministic, s, spec);
      const ToyResult wie = run_gaussian_toy(ToySampler::Wiener, s, spec);
      worst_det = std::max(worst_det, det.median_to_mode);
      if (wie.median_to_mode > det.median_to_mode) ++wiener_farther;
      const double rel = std::abs(wie.spread_std - spec.conditional_std()) / spec.conditional_std();
      worst_spread = std::max(worst_spread, rel);
      if (rel <= 0.2) ++spread_ok;
    }
    const bool ok = worst_det < 0.05 && wiener_farther == 10 && spread_ok == 10;
    return Verdict{ok, false, false,
                   "deterministic median-to-mode max " + fmt(worst_det) + " (< 0.05), Wiener farther on " +
                       std::to_string(wiener_farther) + "/10 seeds, Wiener spread within 20% of " +
                       fmt(spec.conditional_std()) + " on " + std::to_string(spread_ok) + "/10 (worst " +
                       fmt(100.0 * worst_spread, 3) + "%)"};
  });

  run(6, "synthetic end-to-end", 300.0, [&] {
    const ExperimentConfig cfg = config_from_json(
        nlohmann::json::parse(std::ifstream(source_path("configs/synthetic.json"))));
    const WindowSet base = prepare_windows(cfg);
    if (base.n != 500 || base.t != 24 || base.d != 4) throw InputError("invalid_config", "synthetic.json drifted from N=500, T=24, D=4");
    auto& r = synthetic_runs;
    r.spirit = run_cell(cfg, base, 0.3, seed, Variant::Spirit);
    r.mean = run_cell(cfg, base, 0.3, seed, Variant::MeanImputation);
    r.langevin = run_cell(cfg, base, 0.3, seed, Variant::LangevinUniform);
    r.done = true;
    const double s = r.spirit.metrics.mae, m = r.mean.metrics.mae, l = r.langevin.metrics.mae;
    const bool ok = s <= 0.8 * m && l >= 1.5 * s;
    return Verdict{ok, false, false,
                   "MAE spirit " + fmt(s) + ", mean imputation " + fmt(m) + " (ratio " + fmt(s / m, 3) +
                       ", need <= 0.8), langevin_uniform " + fmt(l) + " (ratio " + fmt(l / s, 3) + ", need >= 1.5)"};
  });

  {
    // Informational: the same cell with the location step scaled by w_i * N.
    const Clock clk;
    try {
      ExperimentConfig cfg =
          config_from_json(nlohmann::json::parse(std::ifstream(source_path("configs/synthetic.json"))));
      cfg.spirit.weight_scaling = true;
      const RunReport r = run_cell(cfg, prepare_windows(cfg), 0.3, seed, Variant::Spirit);
      std::cout << "[INFO] criterion 6 with weight_scaling = true: spirit MAE " << fmt(r.metrics.mae)
                << (synthetic_runs.done ? " vs mean imputation " + fmt(synthetic_runs.mean.metrics.mae) : "") << "; wall "
                << fmt(clk.wall(), 3) << " s" << std::endl;
    } catch (const std::exception& e) {
      std::cout << "[INFO] criterion 6 with weight_scaling = true: threw " << e.what() << std::endl;
    }
  }

  run(7, "ETT-h1 real data (soft)", 1800.0, [&] {
    const char* env = std::getenv("SPIRIT_ETTH1");
    const fs::path csv = env && *env ? fs::path(env) : source_path("data/ETTh1.csv");
    if (!fs::exists(csv)) {
      Verdict v{true, true, true, "ETT-h1 not found at " + csv.string() + " (set SPIRIT_ETTH1); not run"};
      return v;
    }
    ExperimentConfig cfg = config_from_json(nlohmann::json::parse(std::ifstream(source_path("configs/etth1.json"))));
    cfg.dataset = csv.string();
    const WindowSet base = prepare_windows(cfg);
    double total = 0.0;
    std::size_t cells = 0;
    for (double p : cfg.p_miss)
      for (std::uint64_t s : cfg.seeds) {
        total += run_cell(cfg, base, p, s, Variant::Spirit).metrics.mae;
        ++cells;
      }
    const double mae = total / double(cells);
    return Verdict{mae <= 0.30, true, false,
                   "mean standardized MAE over " + std::to_string(cells) + " cells " + fmt(mae) +
                       " (target <= 0.30)"};
  });

  run(8, "convergence plateaus", 10.0, [&] {
    if (!synthetic_runs.done) return Verdict{false, false, false, "criterion 6 did not produce a trace"};
    std::vector<double> loss, mae;
    for (const auto& rec : synthetic_runs.spirit.trace.records) {
      loss.push_back(rec.dsm_loss);
      mae.push_back(rec.mae);
    }
    const ConvergenceSummary cl = convergence_report(loss), cm = convergence_report(mae);
    const bool ok = cl.last_quartile_slope > -0.01 && cm.last_quartile_slope > -0.01;
    return Verdict{ok, false, false,
                   "last-quartile change per 20 iterations: DSM loss " + fmt(100.0 * cl.last_quartile_slope, 3) + "%, MAE " +
                       fmt(100.0 * cm.last_quartile_slope, 3) + "% (need > -1%); plateau onset loss " +
                       (cl.plateau_detected ? std::to_string(cl.plateau_iteration) : "none") + ", MAE " +
                       (cm.plateau_detected ? std::to_string(cm.plateau_iteration) : "none") + " of " +
                       std::to_string(mae.size())};
  });

  std::cout << (hard_failures == 0 ? "acceptance: all hard criteria passed" : "acceptance: " + std::to_string(hard_failures) + " hard criteria failed")
            << std::endl;
  return hard_failures == 0 ? 0 : 1;
}
