// Command-line front end for the SPIRIT toolkit.
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spirit/error.hpp"
#include "spirit/experiment.hpp"
#include "spirit/propcheck.hpp"
#include "spirit/synthetic.hpp"
#include "spirit/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t env_seed(std::uint64_t fallback) {
  const char* env = std::getenv(spirit::kSeedEnvVar);
  if (!env || !*env) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used == std::string(env).size()) return v;
  } catch (const std::exception&) {
  }
  throw spirit::InputError("invalid_config", std::string(spirit::kSeedEnvVar) + " must be an unsigned integer");
}

void print_error(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << json{{"error", code}, {"message", message}, {"exit_code", exit_code}}.dump() << '\n';
}

int report_properties(const std::vector<spirit::props::PropertyResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(40) << r.name << std::right << std::fixed
              << std::setprecision(2) << std::setw(8) << r.seconds << "s  " << r.detail << '\n';
    all = all && r.passed;
  }
  std::cout << (all ? "all properties passed" : "property failures present") << '\n';
  return all ? 0 : 1;
}

spirit::ExperimentConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    spirit::ExperimentConfig cfg;
    cfg.seeds = {env_seed(cfg.seeds.front())};
    return cfg;
  }
  return spirit::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPIRIT: score-based imputation with semi-relaxed transport regularization"};
  app.require_subcommand(1);
  app.footer(std::string("Environment: ") + spirit::kSeedEnvVar +
             " overrides every seed (config seed lists and toy seeds).\n"
             "Exit codes: 0 success, 1 numeric or training failure (or failed checks), 2 input error.");

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string mask_format = "triples";
  std::size_t networks = 20;
  std::string check_dir;

  auto* impute = app.add_subcommand("impute", "Run the (p_miss x seed x variant) grid and write report, trace and imputed CSV per cell");
  impute->add_option("-c,--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("bench", "Run the grid, then aggregate MAE/MSE per variant with deltas and paired t-tests");
  bench->add_option("-c,--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);

  auto* toy_t = app.add_subcommand("toy-transport", "Two-mode matching with outliers: OT and SPT plans");
  toy_t->add_option("-s,--seed", seed, "Random seed");
  toy_t->add_option("-o,--out", out_dir, "Output directory");

  auto* toy_d = app.add_subcommand("toy-dissipative", "2-D Gaussian toy: deterministic flow vs Wiener vs VP drift");
  toy_d->add_option("-s,--seed", seed, "Random seed");
  toy_d->add_option("-o,--out", out_dir, "Output directory");

  auto* mask = app.add_subcommand("mask", "Write the mask of the first (p_miss, seed) cell");
  mask->add_option("-c,--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
  mask->add_option("-f,--format", mask_format, "triples or dense")->check(CLI::IsMember({"triples", "dense"}));

  auto* grad = app.add_subcommand("gradcheck", "Analytic DSM gradients vs central finite differences");
  grad->add_option("-n,--networks", networks, "Number of random networks")->check(CLI::PositiveNumber);
  grad->add_option("-s,--seed", seed, "Random seed");

  auto* prop = app.add_subcommand("propcheck", "Full property suite: invariants, transport oracles, bounds, gradients");
  prop->add_option("-s,--seed", seed, "Random seed");

  auto* self = app.add_subcommand("selfcheck", "Validate every emitted artifact under a directory against its schema");
  self->add_option("dir", check_dir, "Directory to scan")->required()->check(CLI::ExistingDirectory);

  auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark series as CSV");
  synth->add_option("-c,--config", config_path, "JSON config (uses its synthetic block)")->check(CLI::ExistingFile);
  std::string synth_out = "synthetic.csv";
  synth->add_option("-o,--out", synth_out, "Output CSV path");

  auto* robust = app.add_subcommand("robustness", "W2 vs SPT under a Dirac outlier at growing radius");
  robust->add_option("-s,--seed", seed, "Random seed");
  robust->add_option("-o,--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*impute) {
      const auto reports = spirit::cmd_impute(spirit::load_config(config_path));
      for (const auto& r : reports)
        std::cout << spirit::cell_stem(r.p_miss, r.seed, r.variant) << "  mae=" << r.metrics.mae << "  mse=" << r.metrics.mse
                  << '\n';
    } else if (*bench) {
      const auto cfg = spirit::load_config(config_path);
      const auto summary = spirit::cmd_bench(cfg);
      std::cout << spirit::format_bench_table(summary);
    } else if (*toy_t) {
      const auto out = spirit::cmd_toy_transport(env_seed(seed), out_dir);
      std::cout << "outlier mass: ot=" << out.toy.ot_outlier_mass << " spt=" << out.toy.spt_outlier_mass << '\n';
      for (const auto& f : out.files) std::cout << f.string() << '\n';
    } else if (*toy_d) {
      const auto out = spirit::cmd_toy_dissipative(env_seed(seed), out_dir);
      for (const auto& r : out.results)
        std::cout << spirit::to_string(r.sampler) << "  median_to_mode=" << r.median_to_mode << "  spread_std=" << r.spread_std
                  << '\n';
      for (const auto& f : out.files) std::cout << f.string() << '\n';
    } else if (*mask) {
      const auto fmt = mask_format == "dense" ? spirit::MaskFormat::Dense : spirit::MaskFormat::Triples;
      std::cout << spirit::cmd_mask(spirit::load_config(config_path), fmt).string() << '\n';
    } else if (*grad) {
      return report_properties(spirit::props::run_gradcheck_suite(networks, env_seed(seed)));
    } else if (*prop) {
      return report_properties(spirit::props::run_property_suite(env_seed(seed)));
    } else if (*self) {
      const auto problems = spirit::selfcheck(check_dir);
      for (const auto& p : problems) std::cout << "FAIL " << p << '\n';
      if (!problems.empty()) return 1;
      std::cout << "all artifacts conform\n";
    } else if (*synth) {
      const auto cfg = config_or_default(config_path);
      std::ostringstream os;
      spirit::write_series_csv(spirit::generate_synthetic(cfg.synthetic), os);
      spirit::write_atomic(synth_out, os.str());
      std::cout << synth_out << '\n';
    } else if (*robust) {
      spirit::Rng rng(env_seed(seed), {0x726f62ULL});
      auto box = [&](Eigen::Index n) {
        spirit::RowMatrix pts(n, 2);
        for (Eigen::Index k = 0; k < pts.size(); ++k) pts.data()[k] = rng.uniform();
        return spirit::DiscreteMeasure::uniform(std::move(pts));
      };
      const auto mu = box(6), nu = box(6);
      spirit::ContaminationSpec spec;
      spec.z = -Eigen::Vector2d(1.0, 1.0).normalized();
      const auto rows = spirit::robustness_bench(mu, nu, spec, {2.0, 5.0, 10.0, 50.0, 100.0});
      std::ostringstream os;
      os << std::setprecision(17);
      spirit::write_bench_csv(rows, os);
      const fs::path p = fs::path(out_dir) / "robustness.csv";
      spirit::write_atomic(p, os.str());
      std::cout << os.str();
    }
  } catch (const spirit::Error& e) {
    print_error(e.code(), e.what(), e.exit_code());
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    print_error("invalid_config", e.what(), 2);
    return 2;
  } catch (const fs::filesystem_error& e) {
    print_error("io_error", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what(), 1);
    return 1;
  }
  return 0;
}
