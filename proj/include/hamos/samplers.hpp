#pragma once

// Markov transition kernels on the unit sphere. Every kernel proposes a new
// position, applies the Metropolis-Hastings test and, on top of it, a margin
// test; a proposal is kept only if both pass.
//
// Kernels are templates over two small interfaces so the same code runs on the
// kNN OOD-ness potential and on analytic test targets:
//
//   Field:  EnergyEval evaluate(const UnitVector&) const;   // U and grad U
//           double potential(const UnitVector&) const;
//   Margin: bool operator()(const UnitVector&) const;

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hamos/energy.hpp"
#include "hamos/error.hpp"
#include "hamos/id_store.hpp"
#include "hamos/sphere.hpp"

namespace hamos {

using Rng = std::mt19937_64;

template <typename F>
concept PotentialField = requires(const F& f, const UnitVector& z) {
  { f.evaluate(z) } -> std::convertible_to<EnergyEval>;
  { f.potential(z) } -> std::convertible_to<double>;
};

template <typename M>
concept MarginTest = requires(const M& m, const UnitVector& z) {
  { m(z) } -> std::convertible_to<bool>;
};

enum class SamplerVariant { RandomWalk, HMC, MALA, mMALA, RMHMC };

constexpr std::string_view to_string(SamplerVariant v) {
  switch (v) {
    case SamplerVariant::RandomWalk: return "RandomWalk";
    case SamplerVariant::HMC: return "HMC";
    case SamplerVariant::MALA: return "MALA";
    case SamplerVariant::mMALA: return "mMALA";
    case SamplerVariant::RMHMC: return "RMHMC";
  }
  return "HMC";
}

inline SamplerVariant parse_variant(std::string_view s) {
  for (auto v : {SamplerVariant::RandomWalk, SamplerVariant::HMC, SamplerVariant::MALA,
                 SamplerVariant::mMALA, SamplerVariant::RMHMC}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorKind::BadConfig, "unknown sampler variant '" + std::string(s) + "'");
}

struct HmcConfig {
  int leapfrog_steps = 3;
  double step_size = 0.1;
  int rounds = 5;
  SamplerVariant variant = SamplerVariant::HMC;
  std::uint64_t seed = 0;
  int history_window = 2;  // J, previous states feeding the RMHMC covariance
  GradientMode gradient = GradientMode::Analytic;

  /// MALA and mMALA are the L = 1 members of their families.
  int effective_steps() const {
    return variant == SamplerVariant::MALA || variant == SamplerVariant::mMALA ? 1 : leapfrog_steps;
  }

  void validate() const {
    if (leapfrog_steps < 1) throw Error(ErrorKind::BadConfig, "leapfrog steps L must be >= 1");
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) {
      throw Error(ErrorKind::BadConfig, "step size must be finite and non-negative");
    }
    if (rounds < 1) throw Error(ErrorKind::BadConfig, "synthesis rounds R must be >= 1");
    if (history_window < 1) throw Error(ErrorKind::BadConfig, "history window J must be >= 1");
  }

  friend bool operator==(const HmcConfig&, const HmcConfig&) = default;
};

struct HistoryEntry {
  UnitVector position;
  int round = 0;
};

struct ChainState {
  UnitVector position;
  ClusterPair pair;
  double t_minus = -std::numeric_limits<double>::infinity();
  std::vector<HistoryEntry> history;  // accepted positions only
  Rng rng;
  int round = 0;  // rounds completed
};

struct TransitionRecord {
  int round = 0;  // 1-based
  UnitVector proposed;
  double h_init = 0.0;
  double h_prop = 0.0;
  double alpha = 0.0;
  bool mh_accept = false;
  bool margin_pass = false;
  bool accepted = false;
  int degenerate_retries = 0;
};

/// Accepts everything; for targets without an ID barrier.
struct NoMargin {
  bool operator()(const UnitVector&) const { return true; }
};

/// -log max_c P_c^ID(z) > t_minus against a store snapshot.
struct KdeMargin {
  const IdStore* store;
  double kappa;
  double t_minus;

  bool operator()(const UnitVector& z) const { return passes_margin(*store, z, kappa, t_minus); }
};

inline Vec standard_normal(std::size_t d, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec g(d);
  for (auto& x : g) x = n01(rng);
  return g;
}

/// q = (I - z z^T) g with g ~ N(0, I_d).
inline TangentVector draw_momentum(const UnitVector& z, Rng& rng) {
  return project_tangent(standard_normal(z.dim(), rng), z);
}

inline double kinetic(const TangentVector& q) { return 0.5 * dot(q.coords, q.coords); }

template <PotentialField Field>
double hamiltonian(const Field& field, const UnitVector& z, const TangentVector& q) {
  return field.potential(z) + kinetic(q);
}

struct Trajectory {
  UnitVector position;
  TangentVector momentum;
  EnergyEval energy;  // at `position`
};

namespace detail {

inline void half_kick(TangentVector& q, const UnitVector& z, const Vec& grad, double eps) {
  const double c = dot(grad, z.coords());
  for (std::size_t i = 0; i < q.coords.size(); ++i) {
    q.coords[i] -= 0.5 * eps * (grad[i] - c * z[i]);
  }
}

template <PotentialField Field>
Trajectory leapfrog(const Field& field, const UnitVector& z0, const TangentVector& q0,
                    EnergyEval start, int steps, double eps) {
  UnitVector z = z0;
  TangentVector q = q0;
  EnergyEval e = std::move(start);
  for (int l = 0; l < steps; ++l) {
    half_kick(q, z, e.gradient, eps);
    auto [z_next, q_next] = geodesic_step(z, q, eps);
    e = field.evaluate(z_next);
    z = std::move(z_next);
    q = std::move(q_next);
    half_kick(q, z, e.gradient, eps);
  }
  q.base = z;
  return {std::move(z), std::move(q), std::move(e)};
}

inline bool mh_test(double alpha, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  return !std::isnan(alpha) && u < std::min(1.0, alpha);
}

inline constexpr int kDegenerateRetries = 3;

// Empirical covariance of the last J+1 accepted positions plus a 1e-6 ridge;
// nullopt while fewer than two positions are available.
inline std::optional<Eigen::MatrixXd> momentum_covariance(const ChainState& state, int window) {
  const std::size_t n_hist = state.history.size();
  if (n_hist < 2) return std::nullopt;
  const std::size_t n = std::min<std::size_t>(n_hist, static_cast<std::size_t>(window) + 1);
  const std::size_t d = state.position.dim();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& p = state.history[n_hist - n + r].position;
    for (std::size_t c = 0; c < d; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = p[c];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  cov.diagonal().array() += 1e-6;
  return cov;
}

inline TangentVector draw_momentum_cov(const UnitVector& z, const Eigen::MatrixXd& cov, Rng& rng) {
  const Vec g = standard_normal(z.dim(), rng);
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::DegenerateDensity, "momentum covariance is not positive definite");
  }
  const Eigen::VectorXd s =
      llt.matrixL() * Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  return project_tangent(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), z);
}

template <MarginTest Margin>
void finish_record(TransitionRecord& rec, ChainState& state, const Margin& margin) {
  rec.margin_pass = margin(rec.proposed);
  rec.accepted = rec.mh_accept && rec.margin_pass;
  if (rec.accepted) {
    state.position = rec.proposed;
    state.history.push_back({rec.proposed, rec.round});
  }
}

inline TransitionRecord degenerate_record(const ChainState& state, int round, int retries) {
  TransitionRecord rec;
  rec.round = round;
  rec.proposed = state.position;
  rec.h_init = rec.h_prop = std::numeric_limits<double>::quiet_NaN();
  rec.degenerate_retries = retries;
  return rec;
}

// Shared body of HMC, MALA, RMHMC and mMALA; they differ only in the
// momentum law and the number of Leapfrog steps.
template <PotentialField Field, MarginTest Margin>
TransitionRecord hamiltonian_transition(const Field& field, const Margin& margin, ChainState& state,
                                        const HmcConfig& cfg, bool riemannian) {
  const int round = state.round + 1;
  const auto cov = riemannian ? momentum_covariance(state, cfg.history_window) : std::nullopt;
  int retries = 0;
  for (;;) {
    try {
      TangentVector q = cov ? draw_momentum_cov(state.position, *cov, state.rng)
                            : draw_momentum(state.position, state.rng);
      EnergyEval start = field.evaluate(state.position);
      const double h_init = start.potential + kinetic(q);
      Trajectory t = leapfrog(field, state.position, q, std::move(start), cfg.effective_steps(),
                              cfg.step_size);
      TransitionRecord rec;
      rec.round = round;
      rec.h_init = h_init;
      rec.h_prop = t.energy.potential + kinetic(t.momentum);
      rec.alpha = std::exp(-rec.h_prop + rec.h_init);
      rec.mh_accept = mh_test(rec.alpha, state.rng);
      rec.proposed = std::move(t.position);
      rec.degenerate_retries = retries;
      finish_record(rec, state, margin);
      state.round = round;
      return rec;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateDensity) throw;
      if (++retries >= kDegenerateRetries) {
        state.round = round;
        return degenerate_record(state, round, retries);
      }
    }
  }
}

}  // namespace detail

/// L Leapfrog steps of spherical HMC: half momentum kick with the
/// tangent-projected gradient, exact geodesic rotation of (z, q), half kick at
/// the new position.
template <PotentialField Field>
Trajectory leapfrog_trajectory(const Field& field, const UnitVector& z0, const TangentVector& q0,
                               int steps, double eps) {
  return detail::leapfrog(field, z0, q0, field.evaluate(z0), steps, eps);
}

template <PotentialField Field, MarginTest Margin>
TransitionRecord hmc_transition(const Field& field, const Margin& margin, ChainState& state,
                                const HmcConfig& cfg) {
  return detail::hamiltonian_transition(field, margin, state, cfg, false);
}

/// HMC with momentum drawn from the empirical covariance of recent accepted
/// positions. The kinetic energy stays ||q||^2 / 2.
template <PotentialField Field, MarginTest Margin>
TransitionRecord rmhmc_transition(const Field& field, const Margin& margin, ChainState& state,
                                  const HmcConfig& cfg) {
  return detail::hamiltonian_transition(field, margin, state, cfg, true);
}

template <PotentialField Field, MarginTest Margin>
TransitionRecord mmala_transition(const Field& field, const Margin& margin, ChainState& state,
                                  HmcConfig cfg) {
  cfg.variant = SamplerVariant::mMALA;
  return detail::hamiltonian_transition(field, margin, state, cfg, true);
}

/// Metropolis random walk: z' = normalize(z + eps * g), g ~ N(0, I_d).
template <PotentialField Field, MarginTest Margin>
TransitionRecord random_walk_transition(const Field& field, const Margin& margin, ChainState& state,
                                        const HmcConfig& cfg) {
  const int round = state.round + 1;
  int retries = 0;
  for (;;) {
    try {
      const Vec g = standard_normal(state.position.dim(), state.rng);
      Vec moved(state.position.vec());
      for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += cfg.step_size * g[i];
      TransitionRecord rec;
      rec.round = round;
      rec.h_init = field.potential(state.position);
      rec.proposed = UnitVector::normalize(std::move(moved));
      rec.h_prop = field.potential(rec.proposed);
      rec.alpha = std::exp(-rec.h_prop + rec.h_init);
      rec.mh_accept = detail::mh_test(rec.alpha, state.rng);
      rec.degenerate_retries = retries;
      detail::finish_record(rec, state, margin);
      state.round = round;
      return rec;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateDensity && e.kind() != ErrorKind::ZeroVector) throw;
      if (++retries >= detail::kDegenerateRetries) {
        state.round = round;
        return detail::degenerate_record(state, round, retries);
      }
    }
  }
}

/// One round of the configured variant.
template <PotentialField Field, MarginTest Margin>
TransitionRecord transition(const Field& field, const Margin& margin, ChainState& state,
                            const HmcConfig& cfg) {
  switch (cfg.variant) {
    case SamplerVariant::RandomWalk: return random_walk_transition(field, margin, state, cfg);
    case SamplerVariant::HMC:
    case SamplerVariant::MALA: return hmc_transition(field, margin, state, cfg);
    case SamplerVariant::mMALA:
    case SamplerVariant::RMHMC: return rmhmc_transition(field, margin, state, cfg);
  }
  return hmc_transition(field, margin, state, cfg);
}

}  // namespace hamos
