#pragma once

// Inference-time KNN detector and the evaluation metrics built on it.
//
// Conventions:
//  * scores are "higher = more ID"; the KNN score is the negated k-th
//    neighbor distance;
//  * AUROC counts ties as half a win (Mann-Whitney);
//  * AUPR treats ID as the positive class and integrates precision over
//    recall with the trapezoid rule, starting from (recall 0, precision 1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamos/error.hpp"
#include "hamos/sphere.hpp"

namespace hamos {

/// A flat, contiguous reference set for exact kNN scans.
class ReferenceSet {
 public:
  ReferenceSet() = default;
  explicit ReferenceSet(std::span<const UnitVector> points) {
    if (points.empty()) return;
    dim_ = points.front().dim();
    data_.reserve(points.size() * dim_);
    for (const auto& p : points) {
      if (p.dim() != dim_) throw Error(ErrorKind::BadArg, "reference points differ in dimension");
      data_.insert(data_.end(), p.coords().begin(), p.coords().end());
    }
    size_ = points.size();
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t dim() const noexcept { return dim_; }

  double kth_distance(std::span<const double> z, std::size_t k) const {
    if (k < 1) throw Error(ErrorKind::BadArg, "k must be >= 1");
    if (size_ < k) {
      throw Error(ErrorKind::InsufficientData, "reference set holds " + std::to_string(size_) +
                                                   " < k=" + std::to_string(k) + " points");
    }
    if (z.size() != dim_) throw Error(ErrorKind::BadArg, "query has wrong dimension");
    std::vector<double> dist(size_);
    for (std::size_t i = 0; i < size_; ++i) dist[i] = distance(z, {data_.data() + i * dim_, dim_});
    auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(dist.begin(), kth, dist.end());
    return *kth;
  }

  double score(const UnitVector& z, std::size_t k) const { return -kth_distance(z.coords(), k); }

  std::vector<double> scores(std::span<const UnitVector> zs, std::size_t k) const {
    std::vector<double> out;
    out.reserve(zs.size());
    for (const auto& z : zs) out.push_back(score(z, k));
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::size_t size_ = 0;
  Vec data_;
};

/// -||z - Z_(k)||, the negated distance to the k-th nearest reference point.
inline double knn_score(std::span<const UnitVector> reference, const UnitVector& z, std::size_t k) {
  return ReferenceSet(reference).score(z, k);
}

/// Largest beta such that at least 95% of the ID scores are >= beta.
inline double calibrate_threshold(std::span<const double> id_scores) {
  const std::size_t n = id_scores.size();
  if (n < 20) {
    throw Error(ErrorKind::TooFewSamples, "need at least 20 ID scores, got " + std::to_string(n));
  }
  const std::size_t need = (95 * n + 99) / 100;  // ceil(0.95 n) in integers
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted[need - 1];
}

namespace detail {
inline void require_nonempty(std::span<const double> id, std::span<const double> ood) {
  if (id.empty() || ood.empty()) throw Error(ErrorKind::TooFewSamples, "score lists must be non-empty");
}
}  // namespace detail

/// Fraction of OOD scores accepted as ID at the 95%-TPR threshold.
inline double fpr_at_tpr95(std::span<const double> id_scores, std::span<const double> ood_scores) {
  detail::require_nonempty(id_scores, ood_scores);
  const double beta = calibrate_threshold(id_scores);
  const auto fp = std::count_if(ood_scores.begin(), ood_scores.end(), [beta](double s) { return s >= beta; });
  return static_cast<double>(fp) / static_cast<double>(ood_scores.size());
}

/// P(ID score > OOD score) + 0.5 P(equal), via midranks.
inline double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  detail::require_nonempty(id_scores, ood_scores);
  const std::size_t n = id_scores.size(), m = ood_scores.size();
  std::vector<std::pair<double, bool>> all;
  all.reserve(n + m);
  for (double s : id_scores) all.emplace_back(s, true);
  for (double s : ood_scores) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double id_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t ids = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      ids += all[j].second ? 1 : 0;
      ++j;
    }
    // ranks i+1 .. j share the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    id_rank_sum += midrank * static_cast<double>(ids);
    i = j;
  }
  const double u = id_rank_sum - 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
  return u / (static_cast<double>(n) * static_cast<double>(m));
}

/// Area under precision(recall) with ID positive.
inline double aupr(std::span<const double> id_scores, std::span<const double> ood_scores) {
  detail::require_nonempty(id_scores, ood_scores);
  std::vector<std::pair<double, bool>> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.emplace_back(s, true);
  for (double s : ood_scores) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const double n_pos = static_cast<double>(id_scores.size());
  double tp = 0.0, fp = 0.0;
  double prev_recall = 0.0, prev_precision = 1.0;
  double area = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / n_pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * (precision + prev_precision) / 2.0;
    prev_recall = recall;
    prev_precision = precision;
    i = j;
  }
  return area;
}

struct ScoreReport {
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
  double fpr95 = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double threshold = 0.0;
};

inline ScoreReport make_report(std::vector<double> id_scores, std::vector<double> ood_scores) {
  ScoreReport r;
  r.threshold = calibrate_threshold(id_scores);
  r.fpr95 = fpr_at_tpr95(id_scores, ood_scores);
  r.auroc = hamos::auroc(id_scores, ood_scores);
  r.aupr = hamos::aupr(id_scores, ood_scores);
  r.id_scores = std::move(id_scores);
  r.ood_scores = std::move(ood_scores);
  return r;
}

struct HypersphereQuality {
  double separation_deg = 0.0;   // larger is better
  double dispersion_deg = 0.0;   // larger is better
  double compactness_deg = 0.0;  // smaller is better
};

inline double angle_deg(double cosine) {
  return std::acos(std::clamp(cosine, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

/// Angular forms of the ID-OOD separation, inter-class dispersion and
/// intra-class compactness cosines.
inline HypersphereQuality hypersphere_quality(std::span<const UnitVector> ood_test,
                                              std::span<const UnitVector> id_test,
                                              std::span<const int> id_labels,
                                              std::span<const UnitVector> prototypes) {
  if (prototypes.size() < 2) throw Error(ErrorKind::BadArg, "need at least two prototypes");
  if (id_test.size() != id_labels.size()) throw Error(ErrorKind::BadArg, "labels/embeddings size mismatch");
  if (ood_test.empty() || id_test.empty()) throw Error(ErrorKind::TooFewSamples, "empty test set");
  const std::size_t C = prototypes.size();

  double sep = 0.0;
  for (const auto& z : ood_test) {
    double best = -2.0;
    for (const auto& mu : prototypes) best = std::max(best, dot(z.coords(), mu.coords()));
    sep += best;
  }
  sep /= static_cast<double>(ood_test.size());

  double disp = 0.0;
  for (std::size_t i = 0; i < C; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      if (i != j) row += dot(prototypes[i].coords(), prototypes[j].coords());
    }
    disp += row / static_cast<double>(C - 1);
  }
  disp /= static_cast<double>(C);

  double comp = 0.0;
  for (std::size_t i = 0; i < id_test.size(); ++i) {
    const int c = id_labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= C) throw Error(ErrorKind::BadClass, "label out of range");
    comp += dot(id_test[i].coords(), prototypes[static_cast<std::size_t>(c)].coords());
  }
  comp /= static_cast<double>(id_test.size());

  return {angle_deg(sep), angle_deg(disp), angle_deg(comp)};
}

}  // namespace hamos
