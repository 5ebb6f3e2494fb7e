#pragma once

// Outlier synthesis: one Markov chain per (class, adjacent class) pair,
// started at the midpoint of the two prototypes and run for R rounds against a
// frozen store snapshot. Accepted positions form the outlier batch.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "hamos/energy.hpp"
#include "hamos/error.hpp"
#include "hamos/id_store.hpp"
#include "hamos/metrics.hpp"
#include "hamos/samplers.hpp"
#include "hamos/sphere.hpp"

namespace hamos {

struct SynthesisParams {
  std::size_t k = 200;
  double delta = 0.1;
  double kappa = 2.0;
  int n_adj = 4;
  int threads = 1;
};

struct OutlierSample {
  UnitVector z;
  ClusterPair pair;
  int chain = 0;
  int round = 0;  // 1-based synthesis round that produced it
  bool accepted = true;
};

struct ChainSummary {
  int chain = 0;
  ClusterPair pair;
  int adjacency_rank = 0;
  double t_minus = 0.0;
  int accepted = 0;
  bool skipped = false;
  std::string skip_reason;
  std::vector<TransitionRecord> transitions;
};

struct OutlierBatch {
  std::vector<OutlierSample> samples;  // canonical order: class, adjacency rank, round
  std::vector<ChainSummary> chains;
  HmcConfig config;

  std::size_t size() const noexcept { return samples.size(); }

  std::vector<UnitVector> positions() const {
    std::vector<UnitVector> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.z);
    return out;
  }

  std::size_t transitions() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.transitions.size();
    return n;
  }

  /// Fraction of transitions that passed the Metropolis-Hastings test alone.
  double mh_acceptance() const {
    std::size_t n = 0, ok = 0;
    for (const auto& c : chains) {
      for (const auto& t : c.transitions) {
        ++n;
        ok += t.mh_accept ? 1 : 0;
      }
    }
    return n == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(n);
  }

  /// Fraction of transitions kept (MH and margin).
  double acceptance() const {
    const std::size_t n = transitions();
    return n == 0 ? 0.0 : static_cast<double>(samples.size()) / static_cast<double>(n);
  }

  std::size_t skipped_chains() const {
    return static_cast<std::size_t>(
        std::count_if(chains.begin(), chains.end(), [](const auto& c) { return c.skipped; }));
  }
};

/// Independent per-chain stream; the result does not depend on scheduling.
inline Rng chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x9e3779b9u};
  return Rng(seq);
}

struct ChainPlan {
  int chain = 0;
  ClusterPair pair;
  int rank = 0;
};

/// Every class paired with each of its n_adj nearest classes by prototype
/// cosine; (u, v) and (v, u) are both kept when both arise.
inline std::vector<ChainPlan> plan_chains(const IdStore& store, int n_adj) {
  std::vector<ChainPlan> plan;
  for (int c = 0; c < store.num_classes(); ++c) {
    const auto adj = store.adjacent_clusters(c, n_adj);
    for (int r = 0; r < static_cast<int>(adj.size()); ++r) {
      plan.push_back({static_cast<int>(plan.size()), {c, adj[static_cast<std::size_t>(r)]}, r});
    }
  }
  return plan;
}

namespace detail {

inline void check_synthesis_inputs(const IdStore& store, const SynthesisParams& p) {
  if (p.k < 1) throw Error(ErrorKind::BadConfig, "k must be >= 1");
  if (!(p.kappa > 0.0)) throw Error(ErrorKind::BadConfig, "kappa must be positive");
  if (!(p.delta >= 0.0)) throw Error(ErrorKind::BadConfig, "hard margin delta must be >= 0");
  for (int c = 0; c < store.num_classes(); ++c) {
    if (store.size(c) < p.k) {
      throw Error(ErrorKind::InsufficientData, "class " + std::to_string(c) + " buffer holds " +
                                                   std::to_string(store.size(c)) + " < k=" +
                                                   std::to_string(p.k) + " embeddings");
    }
    (void)store.prototype(c);
  }
}

template <typename Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

inline ChainSummary run_chain(const IdStore& store, const HmcConfig& cfg, const SynthesisParams& p,
                              const ChainPlan& plan, std::vector<OutlierSample>& out) {
  ChainSummary summary;
  summary.chain = plan.chain;
  summary.pair = plan.pair;
  summary.adjacency_rank = plan.rank;

  ChainState state;
  try {
    state.position = store.midpoint(plan.pair);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::AntipodalPrototypes) throw;
    summary.skipped = true;
    summary.skip_reason = e.what();
    return summary;
  }
  state.pair = plan.pair;
  state.t_minus = hard_margin_threshold(store, plan.pair, p.kappa, p.delta);
  state.rng = chain_rng(cfg.seed, plan.chain);
  summary.t_minus = state.t_minus;

  const KnnPotential field(EnergyContext(store, plan.pair, p.k, p.kappa), cfg.gradient);
  const KdeMargin margin{&store, p.kappa, state.t_minus};
  for (int r = 0; r < cfg.rounds; ++r) {
    TransitionRecord rec = transition(field, margin, state, cfg);
    if (rec.accepted) {
      out.push_back({rec.proposed, plan.pair, plan.chain, rec.round, true});
      ++summary.accepted;
    }
    summary.transitions.push_back(std::move(rec));
  }
  return summary;
}

/// Runs every chain for cfg.rounds transitions and gathers the accepted
/// positions. Chains whose prototypes are antipodal are skipped and reported.
inline OutlierBatch synthesize_batch(const IdStore& store, const HmcConfig& cfg,
                                     const SynthesisParams& params) {
  cfg.validate();
  detail::check_synthesis_inputs(store, params);
  const auto plan = plan_chains(store, params.n_adj);

  std::vector<ChainSummary> summaries(plan.size());
  std::vector<std::vector<OutlierSample>> per_chain(plan.size());
  detail::parallel_for(plan.size(), params.threads, [&](std::size_t i) {
    summaries[i] = run_chain(store, cfg, params, plan[i], per_chain[i]);
  });

  OutlierBatch batch;
  batch.config = cfg;
  batch.chains = std::move(summaries);
  for (auto& samples : per_chain) {
    for (auto& s : samples) batch.samples.push_back(std::move(s));
  }
  return batch;
}

struct RoundStats {
  int round = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  std::vector<double> scores;
};

/// KNN detection scores of the batch grouped by synthesis round.
inline std::vector<RoundStats> round_wise_scores(const OutlierBatch& batch, const ReferenceSet& reference,
                                                 std::size_t k_detect) {
  if (batch.samples.empty()) throw Error(ErrorKind::TooFewSamples, "outlier batch is empty");
  int max_round = 0;
  for (const auto& s : batch.samples) max_round = std::max(max_round, s.round);
  std::vector<RoundStats> rounds;
  for (int r = 1; r <= max_round; ++r) {
    RoundStats st;
    st.round = r;
    for (const auto& s : batch.samples) {
      if (s.round == r) st.scores.push_back(reference.score(s.z, k_detect));
    }
    st.count = st.scores.size();
    if (st.count == 0) continue;
    double sum = 0.0;
    for (double x : st.scores) sum += x;
    st.mean = sum / static_cast<double>(st.count);
    double ss = 0.0;
    for (double x : st.scores) ss += (x - st.mean) * (x - st.mean);
    st.stddev = std::sqrt(ss / static_cast<double>(st.count));
    st.min = *std::min_element(st.scores.begin(), st.scores.end());
    st.max = *std::max_element(st.scores.begin(), st.scores.end());
    rounds.push_back(std::move(st));
  }
  return rounds;
}

inline std::vector<RoundStats> round_wise_scores(const OutlierBatch& batch, const IdStore& store,
                                                 std::size_t k_detect) {
  const auto all = store.all_embeddings();
  return round_wise_scores(batch, ReferenceSet(all), k_detect);
}

/// Comparison baseline: normalize(b_uv + sigma * g) around every chain
/// midpoint, count_per_pair samples per pair, rounds numbered 1..count.
inline OutlierBatch gaussian_baseline_batch(const IdStore& store, double sigma, int count_per_pair,
                                            int n_adj, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::BadConfig, "sigma must be >= 0");
  if (count_per_pair < 0) throw Error(ErrorKind::BadConfig, "count per pair must be >= 0");
  OutlierBatch batch;
  batch.config.rounds = std::max(count_per_pair, 1);
  batch.config.step_size = sigma;
  batch.config.seed = seed;
  for (const auto& plan : plan_chains(store, n_adj)) {
    ChainSummary summary;
    summary.chain = plan.chain;
    summary.pair = plan.pair;
    summary.adjacency_rank = plan.rank;
    UnitVector b;
    try {
      b = store.midpoint(plan.pair);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AntipodalPrototypes) throw;
      summary.skipped = true;
      summary.skip_reason = e.what();
      batch.chains.push_back(std::move(summary));
      continue;
    }
    Rng rng = chain_rng(seed, plan.chain);
    for (int i = 0; i < count_per_pair; ++i) {
      const Vec g = standard_normal(b.dim(), rng);
      Vec v(b.vec());
      for (std::size_t j = 0; j < v.size(); ++j) v[j] += sigma * g[j];
      batch.samples.push_back({UnitVector::normalize(std::move(v)), plan.pair, plan.chain, i + 1, true});
      ++summary.accepted;
    }
    batch.chains.push_back(std::move(summary));
  }
  return batch;
}

}  // namespace hamos
