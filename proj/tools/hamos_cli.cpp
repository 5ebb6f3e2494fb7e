// hamos: synthetic stores, outlier synthesis, experiment runs, sweeps and
// score-file evaluation.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hamos/hamos.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericalError = 4;

int exit_code(hamos::ErrorKind k) {
  using hamos::ErrorKind;
  switch (k) {
    case ErrorKind::BadConfig:
    case ErrorKind::BadArg:
    case ErrorKind::BadClass: return kConfigError;
    case ErrorKind::ZeroVector:
    case ErrorKind::AntipodalPrototypes:
    case ErrorKind::DegenerateDensity: return kNumericalError;
    default: return kDataError;
  }
}

// Flags are collected into a JSON object with the config-file keys, then
// layered over the file.
struct Overrides {
  json top = json::object();
  json hmc = json::object();
  std::string config_file;
};

template <typename T>
void flag(CLI::App* app, Overrides& o, const std::string& name, const std::string& key, const std::string& help,
          bool hmc = false) {
  app->add_option_function<T>(
      name, [&o, key, hmc](const T& v) { (hmc ? o.hmc : o.top)[key] = v; }, help);
}

void add_bench_flags(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config_file, "JSON config file; flags override its fields");
  flag<int>(app, o, "--dim", "d", "embedding dimension d");
  flag<int>(app, o, "--classes", "C", "number of ID classes C");
  flag<int>(app, o, "--points-per-class", "points_per_class", "buffer capacity B, filled at start");
  flag<double>(app, o, "--cluster-kappa", "cluster_kappa", "vMF concentration of the synthetic classes");
  flag<std::uint64_t>(app, o, "--proto-seed", "proto_seed", "seed for class directions");
  flag<std::uint64_t>(app, o, "--seed", "seed", "seed for data draws and chains");
  flag<int>(app, o, "--id-batch-per-class", "id_batch_per_class", "fresh ID draws per class and iteration");
  flag<int>(app, o, "--id-test-per-class", "id_test_per_class", "held-out ID test points per class");
  flag<int>(app, o, "--ood-uniform", "ood_uniform", "uniform held-out OOD points");
  flag<int>(app, o, "--ood-midpoint-per-pair", "ood_midpoint_per_pair", "held-out OOD points per chain midpoint");
  flag<double>(app, o, "--ood-midpoint-kappa", "ood_midpoint_kappa", "vMF concentration around midpoints");
  flag<int>(app, o, "-L,--leapfrog-steps", "L", "Leapfrog steps per transition", true);
  flag<double>(app, o, "--epsilon,--step-size", "epsilon", "Leapfrog step size", true);
  flag<int>(app, o, "-R,--rounds", "R", "synthesis rounds per chain", true);
  flag<std::string>(app, o, "--variant", "variant", "RandomWalk|HMC|MALA|mMALA|RMHMC", true);
  flag<int>(app, o, "-J,--history", "J", "RMHMC history window", true);
  flag<std::string>(app, o, "--gradient", "gradient", "analytic|scaled", true);
  flag<int>(app, o, "-k,--k", "k", "k for the synthesis kNN distance (clipped to B)");
  flag<int>(app, o, "--k-detect", "k_detect", "k for the KNN detector");
  flag<double>(app, o, "--delta", "delta", "hard margin");
  flag<double>(app, o, "--kappa", "kappa", "KDE bandwidth");
  flag<double>(app, o, "--loss-kappa", "loss_kappa", "loss temperature is 1 / loss-kappa");
  flag<double>(app, o, "--lambda-d", "lambda_d", "OOD discernment weight");
  flag<double>(app, o, "--lambda-c", "lambda_c", "compactness weight");
  flag<int>(app, o, "--n-adj", "n_adj", "adjacent clusters per class (clipped to C-1)");
  flag<double>(app, o, "--ema", "ema", "prototype EMA factor");
  flag<int>(app, o, "-T,--iterations", "iterations", "experiment iterations");
  flag<int>(app, o, "-j,--threads", "threads", "worker threads");
  flag<bool>(app, o, "--trace", "trace", "write per-transition JSONL traces");
  flag<std::string>(app, o, "-o,--output-dir", "output_dir", "output directory");
}

json read_json_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw hamos::Error(hamos::ErrorKind::BadConfig, "cannot open config " + p.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw hamos::Error(hamos::ErrorKind::BadConfig, "config " + p.string() + ": " + e.what());
  }
}

hamos::BenchConfig resolve(const Overrides& o) {
  hamos::BenchConfig cfg;
  if (!o.config_file.empty()) cfg = hamos::bench_config_from_json(read_json_file(o.config_file));
  json layer = o.top;
  if (!o.hmc.empty()) layer["hmc"] = o.hmc;
  cfg = hamos::bench_config_from_json(layer, cfg);
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw hamos::Error(hamos::ErrorKind::Io, "cannot open " + p.string());
  return os;
}

std::vector<double> read_scores(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw hamos::Error(hamos::ErrorKind::Io, "cannot open " + p.string());
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto comma = line.find(',');
    const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      if (out.empty() && lineno == 1) continue;  // header
      throw hamos::Error(hamos::ErrorKind::Io, p.string() + ":" + std::to_string(lineno) + ": not a number");
    }
    if (field.find_first_not_of(" \t\r", used) != std::string::npos) {
      throw hamos::Error(hamos::ErrorKind::Io, p.string() + ":" + std::to_string(lineno) + ": trailing characters");
    }
    out.push_back(v);
  }
  return out;
}

int cmd_gen(const hamos::BenchConfig& cfg, const std::string& store_path) {
  const fs::path out = store_path.empty() ? fs::path(cfg.output_dir.empty() ? "." : cfg.output_dir) / "store.bin"
                                          : fs::path(store_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto store = hamos::generate_synthetic_id(cfg);
  hamos::save_store(store, out);
  std::cout << "wrote " << out.string() << " (C=" << store.num_classes() << ", d=" << store.dim()
            << ", B=" << store.capacity() << ")\n";
  return 0;
}

int cmd_synth(hamos::BenchConfig cfg, const std::string& store_path) {
  const hamos::IdStore store = store_path.empty() ? hamos::generate_synthetic_id(cfg) : hamos::load_store(store_path);
  if (!store_path.empty()) {
    cfg.points_per_class = static_cast<int>(store.capacity());
    cfg.classes = store.num_classes();
  }
  hamos::HmcConfig hmc = cfg.hmc;
  hmc.seed = cfg.seed;
  hamos::SynthesisParams params = cfg.synthesis_params();
  std::size_t min_fill = store.capacity();
  for (int c = 0; c < store.num_classes(); ++c) min_fill = std::min(min_fill, store.size(c));
  params.k = std::min(params.k, min_fill);
  const auto batch = hamos::synthesize_batch(store, hmc, params);

  const fs::path dir = cfg.output_dir.empty() ? fs::path(".") : fs::path(cfg.output_dir);
  {
    auto os = open_out(dir / "batch.csv");
    hamos::write_batch_csv(batch, os);
  }
  {
    auto os = open_out(dir / "batch.json");
    os << hamos::batch_to_json(batch).dump(2) << '\n';
  }
  if (cfg.trace) {
    auto os = open_out(dir / "trace.jsonl");
    hamos::write_trace_jsonl(batch, os);
  }
  if (batch.size() > 0) {
    auto os = open_out(dir / "rounds.csv");
    const std::size_t kd = std::min<std::size_t>(static_cast<std::size_t>(cfg.k_detect), store.all_embeddings().size());
    hamos::write_rounds_csv(hamos::round_wise_scores(batch, store, kd), os);
  }
  std::cout << "chains " << batch.chains.size() << " skipped " << batch.skipped_chains() << " outliers "
            << batch.size() << " mh_acceptance " << hamos::format_real(batch.mh_acceptance()) << '\n';
  return 0;
}

int cmd_run(const hamos::BenchConfig& cfg) {
  const auto art = hamos::run_experiment(cfg);
  const auto& last = art.iterations.back();
  std::cout << "iterations " << art.iterations.size() << " fpr95 " << hamos::format_real(art.final_report.fpr95)
            << " auroc " << hamos::format_real(art.final_report.auroc) << " aupr "
            << hamos::format_real(art.final_report.aupr) << " last_outliers " << last.outliers
            << " last_mh_acceptance " << hamos::format_real(last.mh_acceptance) << '\n';
  return 0;
}

int cmd_sweep(const hamos::BenchConfig& cfg, const std::string& axis, const std::vector<std::string>& values) {
  const auto rows = hamos::ablation_sweep(cfg, hamos::parse_axis(axis), values);
  std::cout << "axis,value,fpr95,auroc,aupr,mean_mh_acceptance,mean_outliers,mean_synth_ms\n";
  for (const auto& r : rows) {
    std::cout << r.axis << ',' << r.value << ',' << hamos::format_real(r.fpr95) << ','
              << hamos::format_real(r.auroc) << ',' << hamos::format_real(r.aupr) << ','
              << hamos::format_real(r.mean_mh_acceptance) << ',' << hamos::format_real(r.mean_outliers) << ','
              << hamos::format_real(r.mean_synth_ms) << '\n';
  }
  return 0;
}

int cmd_score(const std::string& id_path, const std::string& ood_path, const std::string& out, bool as_json) {
  const auto report = hamos::make_report(read_scores(id_path), read_scores(ood_path));
  std::ostringstream text;
  if (as_json) {
    text << hamos::report_to_json(report).dump(2) << '\n';
  } else {
    hamos::write_report_csv(report, text);
  }
  if (out.empty()) {
    std::cout << text.str();
  } else {
    auto os = open_out(out);
    os << text.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamiltonian outlier synthesis on the unit hypersphere"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hamos 0.1.0");

  Overrides o;
  std::string store_path, axis, id_path, ood_path, score_out;
  std::vector<std::string> values;
  bool score_json = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic ID store");
  add_bench_flags(gen, o);
  gen->add_option("--store", store_path, "output store (.json for JSON, binary otherwise)");

  auto* synth = app.add_subcommand("synth", "synthesize one outlier batch");
  add_bench_flags(synth, o);
  synth->add_option("--store", store_path, "input store; a synthetic one is generated when omitted");

  auto* run = app.add_subcommand("run", "run the full experiment loop");
  add_bench_flags(run, o);

  auto* sweep = app.add_subcommand("sweep", "ablation sweep over one axis");
  add_bench_flags(sweep, o);
  sweep->add_option("--axis", axis, "lambda_d|k|delta|L|epsilon|n_adj|R|variant")->required();
  sweep->add_option("--values", values, "values to sweep")->required()->delimiter(',');

  auto* score = app.add_subcommand("score", "FPR95/AUROC/AUPR from score files (higher = more ID)");
  score->add_option("--id", id_path, "ID scores, one per line, or the value after the first comma")->required();
  score->add_option("--ood", ood_path, "OOD scores")->required();
  score->add_option("--out", score_out, "write the report here instead of stdout");
  score->add_flag("--json", score_json, "JSON report instead of CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*score) return cmd_score(id_path, ood_path, score_out, score_json);
    const hamos::BenchConfig cfg = resolve(o);
    if (*gen) return cmd_gen(cfg, store_path);
    if (*synth) return cmd_synth(cfg, store_path);
    if (*run) return cmd_run(cfg);
    if (*sweep) return cmd_sweep(cfg, axis, values);
  } catch (const hamos::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << '\n';
    return kDataError;
  } catch (const json::exception& e) {
    std::cerr << "error (json): " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
