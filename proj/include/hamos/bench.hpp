#pragma once

// Desk-scale experiment harness: synthetic vMF class clusters stand in for a
// trained backbone; the loop refreshes buffers and prototypes, synthesizes a
// batch, evaluates losses and detection metrics, and writes run artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hamos/error.hpp"
#include "hamos/id_store.hpp"
#include "hamos/io.hpp"
#include "hamos/metrics.hpp"
#include "hamos/objectives.hpp"
#include "hamos/samplers.hpp"
#include "hamos/sphere.hpp"
#include "hamos/synthesis.hpp"

namespace hamos {

struct BenchConfig {
  int dim = 16;
  int classes = 10;
  int points_per_class = 500;  // buffer capacity B, filled at start
  double cluster_kappa = 20.0;
  std::uint64_t proto_seed = 1;
  std::uint64_t seed = 7;  // data draws and chains

  int id_batch_per_class = 32;  // fresh ID draws per iteration
  int id_test_per_class = 100;
  int ood_uniform = 500;
  int ood_midpoint_per_pair = 10;
  double ood_midpoint_kappa = 50.0;

  HmcConfig hmc;
  int k = 200;  // clipped to the buffer size
  int k_detect = 50;
  double delta = 0.1;
  double kappa = 2.0;
  double loss_kappa = 2.0;  // tau = 1 / loss_kappa
  double lambda_d = 0.1;
  double lambda_c = 0.5;
  int n_adj = 4;  // clipped to C - 1
  double ema = 0.95;
  int iterations = 10;
  int threads = 1;
  bool trace = false;
  std::string output_dir;

  std::size_t effective_k() const {
    return static_cast<std::size_t>(std::min(k, points_per_class));
  }
  int effective_n_adj() const { return std::min(n_adj, classes - 1); }

  SynthesisParams synthesis_params() const {
    return {effective_k(), delta, kappa, effective_n_adj(), threads};
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::BadConfig, m); };
    if (classes < 2) fail("C must be >= 2");
    if (dim < 2) fail("d must be >= 2");
    if (points_per_class < 1) fail("points per class must be >= 1");
    if (!(cluster_kappa >= 0.0)) fail("cluster kappa must be >= 0");
    if (id_batch_per_class < 0) fail("id batch per class must be >= 0");
    if (id_test_per_class * classes < 20) fail("need at least 20 ID test points");
    if (ood_uniform < 0 || ood_midpoint_per_pair < 0) fail("OOD counts must be >= 0");
    if (ood_uniform + ood_midpoint_per_pair == 0) fail("held-out OOD set is empty");
    if (!(ood_midpoint_kappa >= 0.0)) fail("OOD midpoint kappa must be >= 0");
    if (k < 1 || k_detect < 1) fail("k values must be >= 1");
    if (!(delta >= 0.0)) fail("delta must be >= 0");
    if (!(kappa > 0.0) || !(loss_kappa > 0.0)) fail("kappa values must be > 0");
    if (!(lambda_d >= 0.0) || !(lambda_c >= 0.0)) fail("loss weights must be >= 0");
    if (n_adj < 1) fail("N_adj must be >= 1");
    if (!(ema > 0.0 && ema < 1.0)) fail("EMA factor must lie in (0, 1)");
    if (iterations < 1) fail("iterations must be >= 1");
    if (threads < 1) fail("threads must be >= 1");
    hmc.validate();
  }

  friend bool operator==(const BenchConfig&, const BenchConfig&) = default;
};

inline nlohmann::json to_json(const BenchConfig& c) {
  return {{"d", c.dim},
          {"C", c.classes},
          {"points_per_class", c.points_per_class},
          {"cluster_kappa", c.cluster_kappa},
          {"proto_seed", c.proto_seed},
          {"seed", c.seed},
          {"id_batch_per_class", c.id_batch_per_class},
          {"id_test_per_class", c.id_test_per_class},
          {"ood_uniform", c.ood_uniform},
          {"ood_midpoint_per_pair", c.ood_midpoint_per_pair},
          {"ood_midpoint_kappa", c.ood_midpoint_kappa},
          {"hmc", to_json(c.hmc)},
          {"k", c.k},
          {"k_detect", c.k_detect},
          {"delta", c.delta},
          {"kappa", c.kappa},
          {"loss_kappa", c.loss_kappa},
          {"lambda_d", c.lambda_d},
          {"lambda_c", c.lambda_c},
          {"n_adj", c.n_adj},
          {"ema", c.ema},
          {"iterations", c.iterations},
          {"threads", c.threads},
          {"trace", c.trace},
          {"output_dir", c.output_dir}};
}

/// Fields missing from `j` keep the values of `base`.
inline BenchConfig bench_config_from_json(const nlohmann::json& j, BenchConfig c = {}) {
  try {
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d", c.dim);
    get("C", c.classes);
    get("points_per_class", c.points_per_class);
    get("cluster_kappa", c.cluster_kappa);
    get("proto_seed", c.proto_seed);
    get("seed", c.seed);
    get("id_batch_per_class", c.id_batch_per_class);
    get("id_test_per_class", c.id_test_per_class);
    get("ood_uniform", c.ood_uniform);
    get("ood_midpoint_per_pair", c.ood_midpoint_per_pair);
    get("ood_midpoint_kappa", c.ood_midpoint_kappa);
    if (j.contains("hmc")) c.hmc = hmc_config_from_json(j.at("hmc"), c.hmc);
    get("k", c.k);
    get("k_detect", c.k_detect);
    get("delta", c.delta);
    get("kappa", c.kappa);
    get("loss_kappa", c.loss_kappa);
    get("lambda_d", c.lambda_d);
    get("lambda_c", c.lambda_c);
    get("n_adj", c.n_adj);
    get("ema", c.ema);
    get("iterations", c.iterations);
    get("threads", c.threads);
    get("trace", c.trace);
    get("output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadConfig, std::string("bad config field: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Synthetic data

inline UnitVector uniform_on_sphere(std::size_t d, Rng& rng) {
  for (;;) {
    try {
      return UnitVector::normalize(standard_normal(d, rng));
    } catch (const Error&) {
      // zero draw, resample
    }
  }
}

/// One draw from vMF(mu, kappa): Wood's rejection sampler for the cosine w
/// to mu, then a uniform direction in the tangent space of mu.
inline UnitVector sample_vmf(const UnitVector& mu, double kappa, Rng& rng) {
  const std::size_t d = mu.dim();
  const double m1 = static_cast<double>(d) - 1.0;
  // b = (-2k + sqrt(4k^2 + m1^2)) / m1, written without the cancellation
  const double b = m1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m1 * m1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m1 * std::log(1.0 - x0 * x0);
  std::gamma_distribution<double> gamma(m1 / 2.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double w;
  for (;;) {
    const double ga = gamma(rng), gb = gamma(rng);
    const double z = ga / (ga + gb);
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = unif(rng);
    if (kappa * w + m1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }
  TangentVector v;
  for (;;) {
    v = project_tangent(standard_normal(d, rng), mu);
    if (v.norm() > 1e-12) break;
  }
  const double vn = v.norm();
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  Vec x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = w * mu[i] + s * v.coords[i] / vn;
  return UnitVector::normalize(std::move(x));
}

struct LabelledSet {
  std::vector<UnitVector> points;
  std::vector<int> labels;
};

/// Ground truth behind a synthetic run: the true class directions, an ID store
/// filled with B draws per class, and independent streams for later draws.
struct SyntheticWorld {
  std::vector<UnitVector> centers;
  IdStore store;
  Rng rng;

  LabelledSet draw(int per_class, double kappa) {
    LabelledSet out;
    for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
      for (int i = 0; i < per_class; ++i) {
        out.points.push_back(sample_vmf(centers[static_cast<std::size_t>(c)], kappa, rng));
        out.labels.push_back(c);
      }
    }
    return out;
  }
};

inline Rng seeded_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng(seq);
}

inline SyntheticWorld make_world(const BenchConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.dim);
  Rng proto_rng = seeded_rng(cfg.proto_seed, 0x70726f74u);
  std::vector<UnitVector> centers;
  for (int c = 0; c < cfg.classes; ++c) centers.push_back(uniform_on_sphere(d, proto_rng));

  SyntheticWorld world{std::move(centers),
                       IdStore(cfg.classes, d, static_cast<std::size_t>(cfg.points_per_class), cfg.ema),
                       seeded_rng(cfg.seed, 0x64617461u)};
  const LabelledSet fill = world.draw(cfg.points_per_class, cfg.cluster_kappa);
  world.store.insert_batch(fill.points, fill.labels);
  return world;
}

/// C prototypes spread over the sphere, B vMF(mu_c, kappa_c) draws per class
/// in the buffers, prototypes initialized from the class means.
inline IdStore generate_synthetic_id(const BenchConfig& cfg) { return make_world(cfg).store; }

/// Uniform points on the sphere plus vMF clusters around chain midpoints.
inline std::vector<UnitVector> held_out_ood(const BenchConfig& cfg, const IdStore& store, Rng& rng) {
  std::vector<UnitVector> out;
  for (int i = 0; i < cfg.ood_uniform; ++i) out.push_back(uniform_on_sphere(store.dim(), rng));
  for (const auto& plan : plan_chains(store, cfg.effective_n_adj())) {
    UnitVector b;
    try {
      b = store.midpoint(plan.pair);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AntipodalPrototypes) throw;
      continue;
    }
    for (int i = 0; i < cfg.ood_midpoint_per_pair; ++i) out.push_back(sample_vmf(b, cfg.ood_midpoint_kappa, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment loop

struct IterationMetrics {
  int iteration = 0;
  std::size_t outliers = 0;
  std::size_t transitions = 0;
  double mh_acceptance = 0.0;
  double acceptance = 0.0;
  std::size_t skipped_chains = 0;
  double ood_disc = NAN;  // NaN when the batch is empty
  double l_disp = 0.0;
  double l_comp = 0.0;
  double objective = 0.0;
  double fpr95 = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double outlier_auroc = NAN;
  double outlier_score_std = NAN;
  double baseline_score_std = NAN;
  HypersphereQuality quality;
};

struct RunArtifacts {
  BenchConfig config;
  std::filesystem::path dir;  // empty when nothing was written
  std::vector<IterationMetrics> iterations;
  std::vector<double> synth_ms;
  ScoreReport final_report;
  std::vector<RoundStats> last_rounds;
  OutlierBatch last_batch;
};

inline std::uint64_t iteration_seed(std::uint64_t seed, int iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), 0x73796e74u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline double population_std(const std::vector<double>& xs) {
  if (xs.empty()) return NAN;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + p.string());
  return os;
}

inline void write_metrics_header(std::ostream& os) {
  os << "iteration,outliers,transitions,mh_acceptance,acceptance,skipped_chains,ood_disc,l_disp,"
        "l_comp,objective,fpr95,auroc,aupr,outlier_auroc,outlier_score_std,baseline_score_std,"
        "separation_deg,dispersion_deg,compactness_deg\n";
}

inline void write_metrics_row(std::ostream& os, const IterationMetrics& m) {
  os << m.iteration << ',' << m.outliers << ',' << m.transitions << ',' << format_real(m.mh_acceptance) << ','
     << format_real(m.acceptance) << ',' << m.skipped_chains << ',' << format_real(m.ood_disc) << ','
     << format_real(m.l_disp) << ',' << format_real(m.l_comp) << ',' << format_real(m.objective) << ','
     << format_real(m.fpr95) << ',' << format_real(m.auroc) << ',' << format_real(m.aupr) << ','
     << format_real(m.outlier_auroc) << ',' << format_real(m.outlier_score_std) << ','
     << format_real(m.baseline_score_std) << ',' << format_real(m.quality.separation_deg) << ','
     << format_real(m.quality.dispersion_deg) << ',' << format_real(m.quality.compactness_deg) << '\n';
}

}  // namespace detail

/// The embedding-space training loop, without weight updates: per iteration
/// insert fresh ID draws and EMA-update prototypes, synthesize a batch, then
/// evaluate losses and detection metrics. Files are flushed every iteration,
/// so an aborted run leaves the completed iterations on disk.
inline RunArtifacts run_experiment(const BenchConfig& cfg) {
  cfg.validate();
  RunArtifacts art;
  art.config = cfg;

  SyntheticWorld world = make_world(cfg);
  IdStore& store = world.store;
  Rng eval_rng = seeded_rng(cfg.seed, 0x6576616cu);
  const LabelledSet id_test = [&] {
    LabelledSet s;
    for (int c = 0; c < cfg.classes; ++c) {
      for (int i = 0; i < cfg.id_test_per_class; ++i) {
        s.points.push_back(sample_vmf(world.centers[static_cast<std::size_t>(c)], cfg.cluster_kappa, eval_rng));
        s.labels.push_back(c);
      }
    }
    return s;
  }();
  const std::vector<UnitVector> ood_test = held_out_ood(cfg, store, eval_rng);

  std::ofstream metrics_os, timing_os, trace_os;
  if (!cfg.output_dir.empty()) {
    art.dir = cfg.output_dir;
    std::filesystem::create_directories(art.dir);
    {
      auto os = detail::open_out(art.dir / "config.json");
      os << to_json(cfg).dump(2) << '\n';
    }
    metrics_os = detail::open_out(art.dir / "metrics.csv");
    detail::write_metrics_header(metrics_os);
    timing_os = detail::open_out(art.dir / "timings.csv");
    timing_os << "iteration,synth_ms\n";
    if (cfg.trace) trace_os = detail::open_out(art.dir / "trace.jsonl");
  }

  const double tau = tau_from_kappa(cfg.loss_kappa);
  const auto k_detect = static_cast<std::size_t>(cfg.k_detect);
  for (int it = 1; it <= cfg.iterations; ++it) {
    IterationMetrics m;
    m.iteration = it;

    LabelledSet fresh = world.draw(cfg.id_batch_per_class, cfg.cluster_kappa);
    store.insert_batch(fresh.points, fresh.labels);

    HmcConfig hmc = cfg.hmc;
    hmc.seed = iteration_seed(cfg.seed, it);
    const auto t0 = std::chrono::steady_clock::now();
    OutlierBatch batch = synthesize_batch(store, hmc, cfg.synthesis_params());
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    art.synth_ms.push_back(ms);

    m.outliers = batch.size();
    m.transitions = batch.transitions();
    m.mh_acceptance = batch.mh_acceptance();
    m.acceptance = batch.acceptance();
    m.skipped_chains = batch.skipped_chains();

    std::vector<UnitVector> prototypes;
    for (int c = 0; c < cfg.classes; ++c) prototypes.push_back(store.prototype(c));
    const auto outliers = batch.positions();
    if (!fresh.points.empty()) {
      const auto cider = cider_losses(fresh.points, fresh.labels, prototypes, tau);
      m.l_disp = cider.dispersion;
      m.l_comp = cider.compactness;
    }
    const double id_con = cider_objective({m.l_disp, m.l_comp}, cfg.lambda_c);
    if (!outliers.empty()) {
      m.ood_disc = ood_discernment_loss(outliers, prototypes, tau);
      m.objective = combined_objective(0.0, id_con, m.ood_disc, cfg.lambda_d);
    } else {
      m.objective = combined_objective(0.0, id_con, 0.0, 0.0);
    }

    const auto all = store.all_embeddings();
    const ReferenceSet reference(all);
    const std::size_t kd = std::min(k_detect, reference.size());
    ScoreReport report = make_report(reference.scores(id_test.points, kd), reference.scores(ood_test, kd));
    m.fpr95 = report.fpr95;
    m.auroc = report.auroc;
    m.aupr = report.aupr;
    m.quality = hypersphere_quality(ood_test, id_test.points, id_test.labels, prototypes);

    std::vector<RoundStats> rounds;
    if (!outliers.empty()) {
      const auto outlier_scores = reference.scores(outliers, kd);
      m.outlier_auroc = auroc(report.id_scores, outlier_scores);
      m.outlier_score_std = population_std(outlier_scores);
      rounds = round_wise_scores(batch, reference, kd);
      const OutlierBatch baseline = gaussian_baseline_batch(store, cfg.hmc.step_size, cfg.hmc.rounds,
                                                            cfg.effective_n_adj(), hmc.seed);
      m.baseline_score_std = population_std(reference.scores(baseline.positions(), kd));
    }

    if (!art.dir.empty()) {
      {
        auto os = detail::open_out(art.dir / ("batch_" + std::to_string(it) + ".csv"));
        write_batch_csv(batch, os);
      }
      {
        auto os = detail::open_out(art.dir / ("rounds_" + std::to_string(it) + ".csv"));
        write_rounds_csv(rounds, os);
      }
      detail::write_metrics_row(metrics_os, m);
      metrics_os.flush();
      timing_os << it << ',' << format_real(ms) << '\n';
      timing_os.flush();
      if (cfg.trace) {
        write_trace_jsonl(batch, trace_os);
        trace_os.flush();
      }
    }

    art.iterations.push_back(m);
    art.final_report = std::move(report);
    art.last_rounds = std::move(rounds);
    art.last_batch = std::move(batch);
  }

  if (!art.dir.empty()) {
    {
      auto os = detail::open_out(art.dir / "report.json");
      os << report_to_json(art.final_report).dump(2) << '\n';
    }
    auto os = detail::open_out(art.dir / "report.csv");
    write_report_csv(art.final_report, os);
  }
  return art;
}

// ---------------------------------------------------------------------------
// Ablation sweeps

enum class SweepAxis { LambdaD, K, Delta, L, Epsilon, NAdj, R, Variant };

inline SweepAxis parse_axis(std::string_view s) {
  if (s == "lambda_d") return SweepAxis::LambdaD;
  if (s == "k") return SweepAxis::K;
  if (s == "delta") return SweepAxis::Delta;
  if (s == "L") return SweepAxis::L;
  if (s == "epsilon") return SweepAxis::Epsilon;
  if (s == "n_adj") return SweepAxis::NAdj;
  if (s == "R") return SweepAxis::R;
  if (s == "variant") return SweepAxis::Variant;
  throw Error(ErrorKind::BadConfig, "unknown sweep axis '" + std::string(s) + "'");
}

constexpr std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::LambdaD: return "lambda_d";
    case SweepAxis::K: return "k";
    case SweepAxis::Delta: return "delta";
    case SweepAxis::L: return "L";
    case SweepAxis::Epsilon: return "epsilon";
    case SweepAxis::NAdj: return "n_adj";
    case SweepAxis::R: return "R";
    case SweepAxis::Variant: return "variant";
  }
  return "";
}

inline BenchConfig apply_axis(BenchConfig cfg, SweepAxis axis, const std::string& value) {
  try {
    switch (axis) {
      case SweepAxis::LambdaD: cfg.lambda_d = std::stod(value); break;
      case SweepAxis::K: cfg.k = std::stoi(value); break;
      case SweepAxis::Delta: cfg.delta = std::stod(value); break;
      case SweepAxis::L: cfg.hmc.leapfrog_steps = std::stoi(value); break;
      case SweepAxis::Epsilon: cfg.hmc.step_size = std::stod(value); break;
      case SweepAxis::NAdj: cfg.n_adj = std::stoi(value); break;
      case SweepAxis::R: cfg.hmc.rounds = std::stoi(value); break;
      case SweepAxis::Variant: cfg.hmc.variant = parse_variant(value); break;
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::BadConfig, "bad value '" + value + "' for axis " + std::string(to_string(axis)));
  }
  cfg.validate();
  return cfg;
}

struct SweepRow {
  std::string axis;
  std::string value;
  double fpr95 = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double mean_mh_acceptance = 0.0;
  double mean_outliers = 0.0;
  double mean_ood_disc = NAN;
  double mean_synth_ms = 0.0;
};

inline SweepRow summarize_run(SweepAxis axis, const std::string& value, const RunArtifacts& art) {
  SweepRow row;
  row.axis = std::string(to_string(axis));
  row.value = value;
  row.fpr95 = art.final_report.fpr95;
  row.auroc = art.final_report.auroc;
  row.aupr = art.final_report.aupr;
  double acc = 0.0, outl = 0.0, disc = 0.0, ms = 0.0;
  int n_disc = 0;
  for (const auto& m : art.iterations) {
    acc += m.mh_acceptance;
    outl += static_cast<double>(m.outliers);
    if (!std::isnan(m.ood_disc)) {
      disc += m.ood_disc;
      ++n_disc;
    }
  }
  for (double t : art.synth_ms) ms += t;
  const double n = static_cast<double>(art.iterations.size());
  row.mean_mh_acceptance = acc / n;
  row.mean_outliers = outl / n;
  row.mean_ood_disc = n_disc > 0 ? disc / n_disc : NAN;
  row.mean_synth_ms = ms / static_cast<double>(art.synth_ms.size());
  return row;
}

/// One run per value with the shared seed. Writes sweep.csv (deterministic
/// metrics) and sweep_timing.csv (wall clock) under cfg.output_dir, with one
/// run directory per value.
inline std::vector<SweepRow> ablation_sweep(const BenchConfig& cfg, SweepAxis axis,
                                            const std::vector<std::string>& values) {
  if (values.empty()) throw Error(ErrorKind::BadConfig, "sweep needs at least one value");
  std::vector<BenchConfig> runs;
  for (const auto& v : values) {
    BenchConfig c = apply_axis(cfg, axis, v);
    c.threads = 1;
    if (!cfg.output_dir.empty()) {
      c.output_dir = (std::filesystem::path(cfg.output_dir) / (std::string(to_string(axis)) + "_" + v)).string();
    }
    runs.push_back(std::move(c));
  }
  std::vector<SweepRow> rows(runs.size());
  detail::parallel_for(runs.size(), cfg.threads, [&](std::size_t i) {
    rows[i] = summarize_run(axis, values[i], run_experiment(runs[i]));
  });

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    auto os = detail::open_out(std::filesystem::path(cfg.output_dir) / "sweep.csv");
    os << "axis,value,fpr95,auroc,aupr,mean_mh_acceptance,mean_outliers,mean_ood_disc\n";
    for (const auto& r : rows) {
      os << r.axis << ',' << r.value << ',' << format_real(r.fpr95) << ',' << format_real(r.auroc) << ','
         << format_real(r.aupr) << ',' << format_real(r.mean_mh_acceptance) << ','
         << format_real(r.mean_outliers) << ',' << format_real(r.mean_ood_disc) << '\n';
    }
    auto ts = detail::open_out(std::filesystem::path(cfg.output_dir) / "sweep_timing.csv");
    ts << "axis,value,mean_synth_ms\n";
    for (const auto& r : rows) ts << r.axis << ',' << r.value << ',' << format_real(r.mean_synth_ms) << '\n';
  }
  return rows;
}

}  // namespace hamos
