#pragma once

// Training objectives as plain functions of embeddings and prototypes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hamos/error.hpp"
#include "hamos/sphere.hpp"

namespace hamos {

/// Loss temperature tau; the KDE bandwidth kappa maps to tau = 1 / kappa.
inline double tau_from_kappa(double kappa) {
  if (!(kappa > 0.0)) throw Error(ErrorKind::BadArg, "kappa must be positive");
  return 1.0 / kappa;
}

namespace detail {

inline void check_prototypes(std::span<const UnitVector> prototypes, double tau) {
  if (prototypes.size() < 2) throw Error(ErrorKind::BadArg, "need at least two prototypes");
  if (!(tau > 0.0)) throw Error(ErrorKind::BadArg, "temperature must be positive");
}

// logits_j = z^T mu_j / tau, returns log-sum-exp over j
inline double logits_lse(const UnitVector& z, std::span<const UnitVector> prototypes, double tau,
                         std::vector<double>& logits) {
  logits.resize(prototypes.size());
  double mx = -INFINITY;
  for (std::size_t j = 0; j < prototypes.size(); ++j) {
    logits[j] = dot(z.coords(), prototypes[j].coords()) / tau;
    mx = std::max(mx, logits[j]);
  }
  double s = 0.0;
  for (double l : logits) s += std::exp(l - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// (1/M) sum_i (1/C) sum_j log softmax_j(z_i^T mu / tau). Non-positive; equals
/// -log C when every outlier is equidistant from all prototypes.
inline double ood_discernment_loss(std::span<const UnitVector> outliers,
                                   std::span<const UnitVector> prototypes, double tau) {
  detail::check_prototypes(prototypes, tau);
  if (outliers.empty()) throw Error(ErrorKind::TooFewSamples, "no outliers");
  const double C = static_cast<double>(prototypes.size());
  std::vector<double> logits;
  double total = 0.0;
  for (const auto& z : outliers) {
    const double lse = detail::logits_lse(z, prototypes, tau, logits);
    double row = 0.0;
    for (double l : logits) row += l - lse;
    total += row / C;
  }
  return total / static_cast<double>(outliers.size());
}

/// d L_OOD-disc / d z_i for every outlier (ambient, unconstrained).
inline std::vector<Vec> ood_discernment_gradient(std::span<const UnitVector> outliers,
                                                 std::span<const UnitVector> prototypes, double tau) {
  detail::check_prototypes(prototypes, tau);
  if (outliers.empty()) throw Error(ErrorKind::TooFewSamples, "no outliers");
  const std::size_t C = prototypes.size();
  const std::size_t d = prototypes.front().dim();
  const double M = static_cast<double>(outliers.size());

  Vec mean_mu(d, 0.0);
  for (const auto& mu : prototypes) {
    for (std::size_t i = 0; i < d; ++i) mean_mu[i] += mu[i] / static_cast<double>(C);
  }
  std::vector<double> logits;
  std::vector<Vec> grads;
  grads.reserve(outliers.size());
  for (const auto& z : outliers) {
    const double lse = detail::logits_lse(z, prototypes, tau, logits);
    Vec g(mean_mu);
    for (std::size_t j = 0; j < C; ++j) {
      const double p = std::exp(logits[j] - lse);
      for (std::size_t i = 0; i < d; ++i) g[i] -= p * prototypes[j][i];
    }
    for (double& x : g) x /= tau * M;
    grads.push_back(std::move(g));
  }
  return grads;
}

struct CiderLosses {
  double dispersion = 0.0;
  double compactness = 0.0;
};

/// Prototype dispersion and embedding-to-prototype compactness losses.
inline CiderLosses cider_losses(std::span<const UnitVector> id_embeddings, std::span<const int> labels,
                                std::span<const UnitVector> prototypes, double tau) {
  detail::check_prototypes(prototypes, tau);
  if (id_embeddings.size() != labels.size()) throw Error(ErrorKind::BadArg, "labels/embeddings size mismatch");
  if (id_embeddings.empty()) throw Error(ErrorKind::TooFewSamples, "no ID embeddings");
  const std::size_t C = prototypes.size();

  CiderLosses out;
  for (std::size_t i = 0; i < C; ++i) {
    double mx = -INFINITY;
    std::vector<double> sims;
    for (std::size_t j = 0; j < C; ++j) {
      if (j == i) continue;
      sims.push_back(dot(prototypes[i].coords(), prototypes[j].coords()) / tau);
      mx = std::max(mx, sims.back());
    }
    double s = 0.0;
    for (double x : sims) s += std::exp(x - mx);
    out.dispersion += mx + std::log(s / static_cast<double>(C - 1));
  }
  out.dispersion /= static_cast<double>(C);

  std::vector<double> logits;
  for (std::size_t i = 0; i < id_embeddings.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= C) throw Error(ErrorKind::BadClass, "label out of range");
    const double lse = detail::logits_lse(id_embeddings[i], prototypes, tau, logits);
    out.compactness -= logits[static_cast<std::size_t>(c)] - lse;
  }
  out.compactness /= static_cast<double>(id_embeddings.size());
  return out;
}

/// L_CIDER = L_disp + lambda_c * L_comp.
inline double cider_objective(const CiderLosses& l, double lambda_c = 0.5) {
  return l.dispersion + lambda_c * l.compactness;
}

/// L = L_CE + L_ID-con + lambda_d * L_OOD-disc; the CE term is supplied by
/// the caller.
inline double combined_objective(double ce_value, double id_con_value, double ood_disc_value,
                                 double lambda_d) {
  return ce_value + id_con_value + lambda_d * ood_disc_value;
}

}  // namespace hamos
