#include "spirit/experiment.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "spirit/error.hpp"
#include "spirit/rng.hpp"

namespace spirit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum : std::uint64_t { kTagMask = 0x6d61736b, kTagSpirit = 0x73706972, kTagDsm = 0x64736d };

std::uint64_t ratio_tag(double p) { return std::bit_cast<std::uint64_t>(p); }

template <typename T>
void take(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError("invalid_config", std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw InputError("invalid_config", where + " must be a JSON object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw InputError("invalid_config", "unknown config key '" + where + "." + k + "'");
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("file_not_found", "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_ratio(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", p);
  return buf;
}

json trace_record_json(const TraceRecord& r) {
  return {{"round", r.round},     {"iter", r.iter}, {"dsm_loss", r.dsm_loss},
          {"mae", r.mae},         {"mse", r.mse},   {"mean_score_norm", r.mean_score_norm},
          {"weight_entropy", r.weight_entropy}};
}

std::string trace_jsonl(const std::vector<TraceRecord>& recs) {
  std::string out;
  for (const auto& r : recs) out += trace_record_json(r).dump() + "\n";
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

// Header must match exactly; every row needs the same arity and numeric cells
// from column `numeric_from` on.
void check_csv(const fs::path& p, const std::vector<std::string>& header, std::size_t numeric_from,
               std::vector<std::string>& problems) {
  std::ifstream in(p);
  std::string line;
  if (!std::getline(in, line)) {
    problems.push_back(p.filename().string() + ": empty file");
    return;
  }
  const auto cols = split_csv_line(line);
  if (!header.empty() && cols != header) {
    problems.push_back(p.filename().string() + ": unexpected header '" + line + "'");
    return;
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != cols.size()) {
      problems.push_back(p.filename().string() + ":" + std::to_string(row) + ": expected " + std::to_string(cols.size()) +
                         " fields");
      return;
    }
    for (std::size_t c = numeric_from; c < cells.size(); ++c)
      if (!is_number(cells[c])) {
        problems.push_back(p.filename().string() + ":" + std::to_string(row) + ": non-numeric cell '" + cells[c] + "'");
        return;
      }
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw InputError("invalid_config", "dataset must be set");
  if (patch_length < 1) throw InputError("invalid_config", "patch_length must be positive");
  if (p_miss.empty()) throw InputError("invalid_config", "p_miss list is empty");
  if (seeds.empty()) throw InputError("invalid_config", "seeds list is empty");
  if (variants.empty()) throw InputError("invalid_config", "variants list is empty");
  if (output_dir.empty()) throw InputError("invalid_config", "output_dir must be set");
  for (double p : p_miss) {
    MaskSpec m = mask;
    m.p_miss = p;
    m.validate();
  }
  spirit.validate();
  dsm.validate();
  if (dataset == kSyntheticDataset) synthetic.validate();
}

json to_json(const ExperimentConfig& cfg) {
  json variants = json::array();
  for (Variant v : cfg.variants) variants.push_back(std::string(to_string(v)));
  return {
      {"dataset", cfg.dataset},
      {"schema", cfg.schema},
      {"patch_length", cfg.patch_length},
      {"p_miss", cfg.p_miss},
      {"seeds", cfg.seeds},
      {"variants", variants},
      {"output_dir", cfg.output_dir},
      {"max_parallel", cfg.max_parallel},
      {"spirit",
       {{"eta", cfg.spirit.eta},
        {"outer_rounds", cfg.spirit.outer_rounds},
        {"imp_iters", cfg.spirit.imp_iters},
        {"weight_scaling", cfg.spirit.weight_scaling},
        {"init_mode", std::string(to_string(cfg.spirit.init_mode))},
        {"teleport_sign_flip", cfg.spirit.teleport_sign_flip}}},
      {"dsm",
       {{"sigma", cfg.dsm.sigma},
        {"learning_rate", cfg.dsm.learning_rate},
        {"epochs", cfg.dsm.epochs},
        {"batch_size", cfg.dsm.batch_size},
        {"hidden_dim", cfg.dsm.hidden_dim},
        {"noise_weighting", cfg.dsm.noise_weighting}}},
      {"mask", {{"anchor_fraction", cfg.mask.anchor_fraction}, {"bias_tolerance", cfg.mask.bias_tolerance}}},
      {"synthetic",
       {{"windows", cfg.synthetic.windows},
        {"features", cfg.synthetic.features},
        {"seed", cfg.synthetic.seed},
        {"latent_ar", cfg.synthetic.latent_ar},
        {"noise_ar", cfg.synthetic.noise_ar},
        {"noise_std", cfg.synthetic.noise_std}}},
  };
}

ExperimentConfig config_from_json(const json& j, const ExperimentConfig& base) {
  reject_unknown(j,
                 {"dataset", "schema", "patch_length", "p_miss", "seeds", "variants", "output_dir", "max_parallel", "spirit",
                  "dsm", "mask", "synthetic"},
                 "config");
  ExperimentConfig cfg = base;
  take(j, "dataset", cfg.dataset);
  take(j, "schema", cfg.schema);
  take(j, "patch_length", cfg.patch_length);
  take(j, "p_miss", cfg.p_miss);
  take(j, "seeds", cfg.seeds);
  take(j, "output_dir", cfg.output_dir);
  take(j, "max_parallel", cfg.max_parallel);
  if (j.contains("variants")) {
    std::vector<std::string> names;
    take(j, "variants", names);
    cfg.variants.clear();
    for (const auto& n : names) cfg.variants.push_back(parse_variant(n));
  }
  if (j.contains("spirit")) {
    const json& s = j.at("spirit");
    reject_unknown(s, {"eta", "outer_rounds", "imp_iters", "weight_scaling", "init_mode", "teleport_sign_flip"}, "spirit");
    take(s, "eta", cfg.spirit.eta);
    take(s, "outer_rounds", cfg.spirit.outer_rounds);
    take(s, "imp_iters", cfg.spirit.imp_iters);
    take(s, "weight_scaling", cfg.spirit.weight_scaling);
    take(s, "teleport_sign_flip", cfg.spirit.teleport_sign_flip);
    if (s.contains("init_mode")) {
      std::string m;
      take(s, "init_mode", m);
      cfg.spirit.init_mode = parse_init_mode(m);
    }
  }
  if (j.contains("dsm")) {
    const json& d = j.at("dsm");
    reject_unknown(d, {"sigma", "learning_rate", "epochs", "batch_size", "hidden_dim", "noise_weighting"}, "dsm");
    take(d, "sigma", cfg.dsm.sigma);
    take(d, "learning_rate", cfg.dsm.learning_rate);
    take(d, "epochs", cfg.dsm.epochs);
    take(d, "batch_size", cfg.dsm.batch_size);
    take(d, "hidden_dim", cfg.dsm.hidden_dim);
    take(d, "noise_weighting", cfg.dsm.noise_weighting);
  }
  if (j.contains("mask")) {
    const json& m = j.at("mask");
    reject_unknown(m, {"anchor_fraction", "bias_tolerance"}, "mask");
    take(m, "anchor_fraction", cfg.mask.anchor_fraction);
    take(m, "bias_tolerance", cfg.mask.bias_tolerance);
  }
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    reject_unknown(s, {"windows", "features", "seed", "latent_ar", "noise_ar", "noise_std"}, "synthetic");
    take(s, "windows", cfg.synthetic.windows);
    take(s, "features", cfg.synthetic.features);
    take(s, "seed", cfg.synthetic.seed);
    take(s, "latent_ar", cfg.synthetic.latent_ar);
    take(s, "noise_ar", cfg.synthetic.noise_ar);
    take(s, "noise_std", cfg.synthetic.noise_std);
  }
  cfg.synthetic.patch_length = cfg.patch_length;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("parse_error", path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = config_from_json(j);
  if (const char* env = std::getenv(kSeedEnvVar); env && *env) {
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw InputError("invalid_config", std::string(kSeedEnvVar) + " must be an unsigned integer");
    }
    cfg.seeds = {seed};
  }
  return cfg;
}

WindowSet prepare_windows(const ExperimentConfig& cfg) {
  RawSeries series;
  if (cfg.dataset == kSyntheticDataset) {
    SyntheticSpec spec = cfg.synthetic;
    spec.patch_length = cfg.patch_length;
    series = generate_synthetic(spec);
  } else {
    series = load_csv(cfg.dataset, cfg.schema);
  }
  return standardize_and_window(series, cfg.patch_length);
}

json to_json(const RunReport& r) {
  json per_feature = json::array();
  for (const auto& f : r.metrics.per_feature)
    per_feature.push_back({{"mae", f.mae}, {"mse", f.mse}, {"mae_raw", f.mae_raw}, {"mse_raw", f.mse_raw},
                           {"n_evaluated", f.n_evaluated}});
  return {{"dataset", r.dataset},
          {"p_miss", r.p_miss},
          {"seed", r.seed},
          {"variant", std::string(to_string(r.variant))},
          {"mae", r.metrics.mae},
          {"mse", r.metrics.mse},
          {"mae_raw", r.metrics.mae_raw},
          {"mse_raw", r.metrics.mse_raw},
          {"n_evaluated", r.metrics.n_evaluated},
          {"runtime_s", r.runtime_s},
          {"per_feature", per_feature},
          {"window_mae", r.window_mae},
          {"warnings", r.warnings},
          {"config", r.config_echo}};
}

std::string cell_stem(double p_miss, std::uint64_t seed, Variant variant) {
  return std::string(to_string(variant)) + "_p" + format_ratio(p_miss) + "_s" + std::to_string(seed);
}

RunReport run_cell(const ExperimentConfig& cfg, const WindowSet& base, double p_miss, std::uint64_t seed, Variant variant,
                   SpiritRun* keep, const TraceSink& sink) {
  const auto t0 = std::chrono::steady_clock::now();
  MaskSpec mask = cfg.mask;
  mask.p_miss = p_miss;
  mask.seed = derive_seed(seed, {kTagMask, ratio_tag(p_miss)});
  SpiritConfig sc = cfg.spirit;
  sc.variant = variant;
  sc.seed = derive_seed(seed, {kTagSpirit, ratio_tag(p_miss)});
  DsmConfig dc = cfg.dsm;
  dc.seed = derive_seed(seed, {kTagDsm, ratio_tag(p_miss)});

  const WindowSet ws = simulate_mcar(base, mask);
  RunReport rep;
  rep.dataset = cfg.dataset;
  rep.p_miss = p_miss;
  rep.seed = seed;
  rep.variant = variant;
  {
    Rng probe(sc.seed, {0});
    init_imputation(ws, sc, probe, &rep.warnings);
  }
  SpiritRun run = run_variant(ws, sc, dc, sink);
  rep.metrics = masked_mae_mse(ws, run.imputed);
  rep.window_mae = per_window_mae(ws.ideal, run.imputed, ws.mask);
  rep.trace = run.trace;
  rep.config_echo = to_json(cfg);
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (keep) *keep = std::move(run);
  return rep;
}

void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("output_not_writable", "cannot write " + tmp.string());
    out << contents;
    if (!out) throw InputError("output_not_writable", "failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<RunReport> cmd_impute(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out_dir = cfg.output_dir;
  fs::create_directories(out_dir);
  const WindowSet base = prepare_windows(cfg);

  struct Cell {
    double p;
    std::uint64_t seed;
    Variant variant;
  };
  std::vector<Cell> cells;
  for (double p : cfg.p_miss)
    for (std::uint64_t s : cfg.seeds)
      for (Variant v : cfg.variants) cells.push_back({p, s, v});

  auto run_one = [&](const Cell& c) {
    const std::string stem = cell_stem(c.p, c.seed, c.variant);
    std::vector<TraceRecord> partial;
    SpiritRun run;
    RunReport rep;
    try {
      rep = run_cell(cfg, base, c.p, c.seed, c.variant, &run, [&](const TraceRecord& r) { partial.push_back(r); });
    } catch (...) {
      if (!partial.empty()) write_atomic(out_dir / (stem + ".trace.jsonl"), trace_jsonl(partial));
      throw;
    }
    write_atomic(out_dir / (stem + ".trace.jsonl"), trace_jsonl(rep.trace.records));
    MaskSpec mask = cfg.mask;
    mask.p_miss = c.p;
    mask.seed = derive_seed(c.seed, {kTagMask, ratio_tag(c.p)});
    const WindowSet ws = simulate_mcar(base, mask);
    std::ostringstream csv;
    write_imputed_csv(ws, run.imputed_raw, csv);
    write_atomic(out_dir / (stem + ".imputed.csv"), csv.str());
    write_atomic(out_dir / (stem + ".report.json"), to_json(rep).dump(2) + "\n");
    return rep;
  };

  std::size_t parallel = cfg.max_parallel ? cfg.max_parallel : std::max(1u, std::thread::hardware_concurrency());
  std::vector<RunReport> reports(cells.size());
  for (std::size_t start = 0; start < cells.size(); start += parallel) {
    const std::size_t stop = std::min(cells.size(), start + parallel);
    std::vector<std::future<RunReport>> futs;
    for (std::size_t k = start; k < stop; ++k) {
      futs.push_back(std::async(parallel > 1 ? std::launch::async : std::launch::deferred, run_one, cells[k]));
    }
    std::exception_ptr first_error;
    for (std::size_t k = start; k < stop; ++k) {
      try {
        reports[k] = futs[k - start].get();
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }
  return reports;
}

double delta_percent(double value, double reference) { return (value - reference) / reference * 100.0; }

BenchSummary aggregate_bench(const std::vector<RunReport>& reports) {
  BenchSummary s;
  std::vector<Variant> order;
  for (const auto& r : reports)
    if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
  std::set<double> ratios;
  for (const auto& r : reports) ratios.insert(r.p_miss);
  if (order.size() < 2 && ratios.size() < 2)
    throw InputError("invalid_config", "bench needs at least two variants or two missing ratios");

  for (Variant v : order) {
    BenchRow row;
    row.variant = v;
    for (const auto& r : reports)
      if (r.variant == v) {
        row.mae += r.metrics.mae;
        row.mse += r.metrics.mse;
        ++row.cells;
      }
    row.mae /= static_cast<double>(row.cells);
    row.mse /= static_cast<double>(row.cells);
    s.rows.push_back(row);
  }

  const auto ref = std::find_if(s.rows.begin(), s.rows.end(), [](const BenchRow& r) { return r.variant == Variant::Spirit; });
  s.has_comparison = order.size() >= 2 && ref != s.rows.end();
  if (!s.has_comparison) return s;
  const BenchRow reference = *ref;
  for (auto& row : s.rows) {
    if (row.variant == Variant::Spirit) continue;
    row.delta_mae_pct = delta_percent(row.mae, reference.mae);
    row.delta_mse_pct = delta_percent(row.mse, reference.mse);
    std::vector<double> a, b;
    for (const auto& r : reports) {
      if (r.variant != row.variant) continue;
      for (const auto& q : reports)
        if (q.variant == Variant::Spirit && q.p_miss == r.p_miss && q.seed == r.seed) {
          a.insert(a.end(), r.window_mae.begin(), r.window_mae.end());
          b.insert(b.end(), q.window_mae.begin(), q.window_mae.end());
        }
    }
    try {
      if (!a.empty()) row.t_test = paired_t_test(a, b);
    } catch (const InputError&) {
      row.t_test.reset();
    }
  }
  return s;
}

std::string format_bench_table(const BenchSummary& s) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "variant" << std::right << std::setw(10) << "MAE" << std::setw(10) << "MSE";
  if (s.has_comparison) os << std::setw(10) << "dMAE%" << std::setw(10) << "dMSE%" << std::setw(12) << "p-value";
  os << '\n';
  os << std::fixed;
  for (const auto& r : s.rows) {
    os << std::left << std::setw(20) << to_string(r.variant) << std::right << std::setprecision(4) << std::setw(10) << r.mae
       << std::setw(10) << r.mse;
    if (s.has_comparison) {
      if (r.delta_mae_pct) {
        os << std::setprecision(1) << std::setw(10) << *r.delta_mae_pct << std::setw(10) << *r.delta_mse_pct;
        if (r.t_test) {
          os << std::scientific << std::setprecision(2) << std::setw(12) << r.t_test->p_value << std::fixed;
        } else {
          os << std::setw(12) << "n/a";
        }
      } else {
        os << std::setw(10) << "-" << std::setw(10) << "-" << std::setw(12) << "-";
      }
    }
    os << '\n';
  }
  return os.str();
}

void write_bench_summary_csv(const BenchSummary& s, std::ostream& out) {
  out << "variant,mae,mse,cells";
  if (s.has_comparison) out << ",delta_mae_pct,delta_mse_pct,t_statistic,p_value";
  out << '\n';
  out << std::setprecision(17);
  for (const auto& r : s.rows) {
    out << to_string(r.variant) << ',' << r.mae << ',' << r.mse << ',' << r.cells;
    if (s.has_comparison) {
      const double d_mae = r.delta_mae_pct.value_or(0.0);
      const double d_mse = r.delta_mse_pct.value_or(0.0);
      const double t = r.t_test ? r.t_test->t_statistic : 0.0;
      const double p = r.t_test ? r.t_test->p_value : 1.0;
      out << ',' << d_mae << ',' << d_mse << ',' << t << ',' << p;
    }
    out << '\n';
  }
}

BenchSummary cmd_bench(const ExperimentConfig& cfg) {
  std::set<double> ratios(cfg.p_miss.begin(), cfg.p_miss.end());
  if (cfg.variants.size() < 2 && ratios.size() < 2)
    throw InputError("invalid_config", "bench needs at least two variants or two missing ratios");
  const auto reports = cmd_impute(cfg);
  BenchSummary s = aggregate_bench(reports);
  std::ostringstream csv;
  write_bench_summary_csv(s, csv);
  write_atomic(fs::path(cfg.output_dir) / "bench.csv", csv.str());
  write_atomic(fs::path(cfg.output_dir) / "bench.txt", format_bench_table(s));
  return s;
}

ToyTransportOutput cmd_toy_transport(std::uint64_t seed, const fs::path& out_dir) {
  SptSolverConfig cfg;
  cfg.refine_epsilon = 1e-4;
  ToyTransportOutput out;
  out.toy = toy_matching_figure(seed, cfg);
  const auto& toy = out.toy;

  std::ostringstream pts;
  pts << "measure,index,x,y,outlier\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < toy.source.points.rows(); ++i)
    pts << "source," << i << ',' << toy.source.points(i, 0) << ',' << toy.source.points(i, 1) << ",0\n";
  for (Eigen::Index j = 0; j < toy.target.points.rows(); ++j) {
    const bool outlier =
        std::find(toy.outlier_atoms.begin(), toy.outlier_atoms.end(), static_cast<std::size_t>(j)) != toy.outlier_atoms.end();
    pts << "target," << j << ',' << toy.target.points(j, 0) << ',' << toy.target.points(j, 1) << ',' << (outlier ? 1 : 0)
        << '\n';
  }
  std::ostringstream ot, sp;
  ot << std::setprecision(17);
  sp << std::setprecision(17);
  write_plan_csv(toy.ot.plan, ot, 0.0);
  write_plan_csv(toy.spt.plan, sp, 0.0);
  const json summary = {{"seed", seed},
                        {"epsilon", toy.spt.plan.epsilon},
                        {"ot_value", toy.ot.value},
                        {"spt_value", toy.spt.value},
                        {"outlier_target_weight", toy.outlier_target_weight},
                        {"ot_outlier_mass", toy.ot_outlier_mass},
                        {"spt_outlier_mass", toy.spt_outlier_mass},
                        {"ot_cross_mode_mass", toy.ot_cross_mode_mass},
                        {"spt_cross_mode_mass", toy.spt_cross_mode_mass}};
  const std::vector<std::pair<std::string, std::string>> files = {{"toy_points.csv", pts.str()},
                                                                  {"ot_plan.csv", ot.str()},
                                                                  {"spt_plan.csv", sp.str()},
                                                                  {"toy_transport.json", summary.dump(2) + "\n"}};
  for (const auto& [name, body] : files) {
    write_atomic(out_dir / name, body);
    out.files.push_back(out_dir / name);
  }
  return out;
}

ToyDissipativeOutput cmd_toy_dissipative(std::uint64_t seed, const fs::path& out_dir) {
  ToyDissipativeOutput out;
  std::ostringstream summary;
  summary << "sampler,median_x1,median_x2,mode_x1,mode_x2,median_to_mode,spread_std\n" << std::setprecision(17);
  for (ToySampler s : {ToySampler::Deterministic, ToySampler::Wiener, ToySampler::VpDrift}) {
    ToyResult r = run_gaussian_toy(s, seed);
    std::ostringstream cloud;
    cloud << "index,x1,x2,weight\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < r.particles.rows(); ++i)
      cloud << i << ',' << r.particles(i, 0) << ',' << r.particles(i, 1) << ',' << r.weights(i) << '\n';
    const fs::path p = out_dir / ("toy_" + std::string(to_string(s)) + "_particles.csv");
    write_atomic(p, cloud.str());
    out.files.push_back(p);
    summary << to_string(s) << ',' << r.median(0) << ',' << r.median(1) << ',' << r.mode(0) << ',' << r.mode(1) << ','
            << r.median_to_mode << ',' << r.spread_std << '\n';
    out.results.push_back(std::move(r));
  }
  const fs::path p = out_dir / "toy_dissipative.csv";
  write_atomic(p, summary.str());
  out.files.push_back(p);
  return out;
}

fs::path cmd_mask(const ExperimentConfig& cfg, MaskFormat format) {
  cfg.validate();
  const WindowSet base = prepare_windows(cfg);
  const double p = cfg.p_miss.front();
  const std::uint64_t seed = cfg.seeds.front();
  MaskSpec mask = cfg.mask;
  mask.p_miss = p;
  mask.seed = derive_seed(seed, {kTagMask, ratio_tag(p)});
  const WindowSet ws = simulate_mcar(base, mask);
  std::ostringstream os;
  write_mask_csv(ws, os, format);
  const fs::path path = fs::path(cfg.output_dir) /
                        ("mask_p" + format_ratio(p) + "_s" + std::to_string(seed) +
                         (format == MaskFormat::Triples ? ".triples.csv" : ".dense.csv"));
  write_atomic(path, os.str());
  return path;
}

std::vector<std::string> selfcheck(const fs::path& dir) {
  std::vector<std::string> problems;
  if (!fs::is_directory(dir)) {
    problems.push_back(dir.string() + ": not a directory");
    return problems;
  }
  static const std::vector<std::string> report_keys = {"dataset", "p_miss", "seed",    "variant",     "mae",
                                                       "mse",     "mae_raw", "mse_raw", "n_evaluated", "runtime_s"};
  static const std::vector<std::string> trace_keys = {"round", "iter", "dsm_loss", "mae", "mse", "mean_score_norm",
                                                      "weight_entropy"};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  for (const auto& p : files) {
    const std::string name = p.filename().string();
    if (ends_with(name, ".report.json")) {
      json j;
      try {
        j = json::parse(read_file(p));
      } catch (const std::exception& e) {
        problems.push_back(name + ": " + e.what());
        continue;
      }
      for (const auto& k : report_keys)
        if (!j.contains(k)) problems.push_back(name + ": missing key '" + k + "'");
      for (const char* k : {"p_miss", "mae", "mse", "mae_raw", "mse_raw", "runtime_s"})
        if (j.contains(k) && !j.at(k).is_number()) problems.push_back(name + ": '" + k + "' is not a number");
      if (j.contains("config")) {
        try {
          const ExperimentConfig c = config_from_json(j.at("config"));
          if (to_json(c) != j.at("config")) problems.push_back(name + ": config echo does not round-trip");
        } catch (const std::exception& e) {
          problems.push_back(name + ": config echo does not parse: " + e.what());
        }
      } else {
        problems.push_back(name + ": missing config echo");
      }
    } else if (ends_with(name, ".trace.jsonl")) {
      std::ifstream in(p);
      std::string line;
      std::size_t row = 0;
      while (std::getline(in, line)) {
        ++row;
        try {
          const json j = json::parse(line);
          for (const auto& k : trace_keys)
            if (!j.contains(k) || !j.at(k).is_number()) {
              problems.push_back(name + ":" + std::to_string(row) + ": bad or missing '" + k + "'");
              break;
            }
        } catch (const std::exception& e) {
          problems.push_back(name + ":" + std::to_string(row) + ": " + e.what());
          break;
        }
      }
    } else if (ends_with(name, "_plan.csv")) {
      check_csv(p, {"i", "j", "mass"}, 0, problems);
    } else if (name == "robustness.csv") {
      check_csv(p, {"radius", "w2", "spt", "bound"}, 0, problems);
    } else if (name == "bench.csv") {
      check_csv(p, {}, 1, problems);
    } else if (ends_with(name, ".triples.csv")) {
      check_csv(p, {"window", "step", "feature"}, 0, problems);
    } else if (ends_with(name, ".dense.csv") || ends_with(name, ".imputed.csv")) {
      check_csv(p, {}, ends_with(name, ".dense.csv") ? 0 : 1, problems);
    } else if (name == "toy_points.csv") {
      check_csv(p, {"measure", "index", "x", "y", "outlier"}, 1, problems);
    } else if (ends_with(name, "_particles.csv")) {
      check_csv(p, {"index", "x1", "x2", "weight"}, 0, problems);
    } else if (name == "toy_dissipative.csv") {
      check_csv(p, {"sampler", "median_x1", "median_x2", "mode_x1", "mode_x2", "median_to_mode", "spread_std"}, 1, problems);
    }
  }
  return problems;
}

}  // namespace spirit
