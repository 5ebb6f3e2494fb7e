#pragma once

// OOD-ness potential driving the sampler, plus the vMF kernel density
// estimate of the ID class posterior used for the hard-margin barrier.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hamos/error.hpp"
#include "hamos/id_store.hpp"
#include "hamos/sphere.hpp"

namespace hamos {

enum class GradientMode {
  Scaled,    // -exp(-U) * (u_hat + v_hat)
  Analytic,  // exact derivative of -log(mean kNN distance), neighbors held fixed
};

/// A frozen view of the store for one cluster pair.
struct EnergyContext {
  const IdStore* store = nullptr;
  ClusterPair pair;
  std::size_t k = 1;
  double kappa = 2.0;

  EnergyContext(const IdStore& s, ClusterPair p, std::size_t k_nn, double concentration)
      : store(&s), pair(p), k(k_nn), kappa(concentration) {
    if (p.u == p.v) throw Error(ErrorKind::BadArg, "cluster pair needs two distinct classes");
    if (!(concentration > 0.0)) throw Error(ErrorKind::BadArg, "kappa must be positive");
    for (int c : {p.u, p.v}) {
      if (s.size(c) < k_nn) {
        throw Error(ErrorKind::InsufficientData, "class " + std::to_string(c) + " holds " +
                                                     std::to_string(s.size(c)) + " < k=" +
                                                     std::to_string(k_nn) + " embeddings");
      }
    }
  }
};

struct PairDistances {
  KnnResult u;
  KnnResult v;
};

inline PairDistances pair_knn(const EnergyContext& ctx, const UnitVector& z) {
  return {ctx.store->knn(ctx.pair.u, z, ctx.k), ctx.store->knn(ctx.pair.v, z, ctx.k)};
}

/// Mean of the k-th nearest-neighbor distances to the two clusters of the pair.
inline double ood_prob(const EnergyContext& ctx, const UnitVector& z) {
  const auto nn = pair_knn(ctx, z);
  return (nn.u.distance + nn.v.distance) / 2.0;
}

inline double potential_from_prob(double p) {
  if (!(p > 0.0)) {
    throw Error(ErrorKind::DegenerateDensity, "OOD-ness is zero; position coincides with ID points");
  }
  return -std::log(p);
}

/// U(z) = -log((d_u + d_v) / 2).
inline double potential(const EnergyContext& ctx, const UnitVector& z) {
  return potential_from_prob(ood_prob(ctx, z));
}

struct EnergyEval {
  double potential = 0.0;
  Vec gradient;
};

/// Potential and its ambient-space gradient from a single pair of kNN queries.
inline EnergyEval evaluate_energy(const EnergyContext& ctx, const UnitVector& z, GradientMode mode) {
  const auto nn = pair_knn(ctx, z);
  const double p = (nn.u.distance + nn.v.distance) / 2.0;
  const double u = potential_from_prob(p);
  if (nn.u.distance == 0.0 || nn.v.distance == 0.0) {
    throw Error(ErrorKind::DegenerateDensity, "position coincides with a k-th neighbor");
  }
  const double scale = mode == GradientMode::Scaled ? -std::exp(-u) : -1.0 / (2.0 * p);
  const std::size_t d = z.dim();
  Vec g(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double du = (z[i] - nn.u.neighbor[i]) / nn.u.distance;
    const double dv = (z[i] - nn.v.neighbor[i]) / nn.v.distance;
    g[i] = scale * (du + dv);
  }
  return {u, std::move(g)};
}

inline Vec grad_potential(const EnergyContext& ctx, const UnitVector& z,
                          GradientMode mode = GradientMode::Analytic) {
  return evaluate_energy(ctx, z, mode).gradient;
}

/// The kNN OOD-ness potential as a field the samplers can integrate.
class KnnPotential {
 public:
  KnnPotential(EnergyContext ctx, GradientMode mode) : ctx_(ctx), mode_(mode) {}

  EnergyEval evaluate(const UnitVector& z) const { return evaluate_energy(ctx_, z, mode_); }
  double potential(const UnitVector& z) const { return hamos::potential(ctx_, z); }

  const EnergyContext& context() const noexcept { return ctx_; }
  GradientMode mode() const noexcept { return mode_; }

 private:
  EnergyContext ctx_;
  GradientMode mode_;
};

/// Unnormalized vMF kernel exp(kappa * center^T z). The Bessel normalizer is
/// class independent and cancels in the class softmax.
inline double vmf_kernel(const UnitVector& z, const UnitVector& center, double kappa) {
  return std::exp(kappa * dot(z.coords(), center.coords()));
}

/// log p_hat_c(z) for every class (up to the shared normalizer), computed with
/// a per-class max shift so large kappa does not overflow.
inline Vec class_log_density(const IdStore& store, std::span<const double> z, double kappa) {
  const int C = store.num_classes();
  Vec out(static_cast<std::size_t>(C));
  std::vector<double> logits;
  for (int c = 0; c < C; ++c) {
    const std::size_t n = store.size(c);
    if (n == 0) throw Error(ErrorKind::EmptyBuffer, "class " + std::to_string(c) + " buffer is empty");
    logits.resize(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = kappa * dot(z, store.embedding(c, i));
      mx = std::max(mx, logits[i]);
    }
    double s = 0.0;
    for (double l : logits) s += std::exp(l - mx);
    out[static_cast<std::size_t>(c)] = mx + std::log(s / static_cast<double>(n));
  }
  return out;
}

/// Softmax over the per-class vMF kernel density estimates.
inline Vec id_prob(const IdStore& store, const UnitVector& z, double kappa) {
  Vec logp = class_log_density(store, z.coords(), kappa);
  const double mx = *std::max_element(logp.begin(), logp.end());
  double s = 0.0;
  for (double& l : logp) {
    l = std::exp(l - mx);
    s += l;
  }
  for (double& l : logp) l /= s;
  return logp;
}

/// -log max_c P_c^ID(z), evaluated in the log domain.
inline double neg_log_max_id_prob(const IdStore& store, const UnitVector& z, double kappa) {
  const Vec logp = class_log_density(store, z.coords(), kappa);
  const double mx = *std::max_element(logp.begin(), logp.end());
  double s = 0.0;
  for (double l : logp) s += std::exp(l - mx);
  return std::log(s);
}

/// t_- = -log max_c P_c^ID(b_uv) - delta, with b_uv the pair midpoint.
inline double hard_margin_threshold(const IdStore& store, ClusterPair pair, double kappa,
                                    double delta) {
  return neg_log_max_id_prob(store, store.midpoint(pair), kappa) - delta;
}

inline bool passes_margin(const IdStore& store, const UnitVector& z, double kappa, double t_minus) {
  return neg_log_max_id_prob(store, z, kappa) > t_minus;
}

}  // namespace hamos
