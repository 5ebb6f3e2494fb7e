#pragma once

// Class-conditional buffers of in-distribution embeddings with EMA prototypes.
// This is the ID prior every sampler and score queries against.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamos/error.hpp"
#include "hamos/sphere.hpp"

namespace hamos {

struct ClusterPair {
  int u = 0;
  int v = 1;

  friend bool operator==(const ClusterPair&, const ClusterPair&) = default;
};

inline ClusterPair cluster_pair(int u, int v) {
  if (u == v) throw Error(ErrorKind::BadArg, "cluster pair needs two distinct classes");
  return {u, v};
}

struct KnnResult {
  double distance = 0.0;
  UnitVector neighbor;
  std::size_t index = 0;  // chronological position in the class buffer, 0 = oldest
};

class IdStore {
 public:
  IdStore(int num_classes, std::size_t dim, std::size_t capacity, double ema_factor = 0.95)
      : num_classes_(num_classes), dim_(dim), capacity_(capacity), ema_factor_(ema_factor) {
    if (num_classes < 2) throw Error(ErrorKind::BadConfig, "need at least two classes");
    if (dim < 2) throw Error(ErrorKind::BadConfig, "embedding dimension must be >= 2");
    if (capacity < 1) throw Error(ErrorKind::BadConfig, "buffer capacity must be >= 1");
    if (!(ema_factor > 0.0 && ema_factor < 1.0)) {
      throw Error(ErrorKind::BadConfig, "EMA factor must lie in (0, 1)");
    }
    buffers_.resize(static_cast<std::size_t>(num_classes));
    for (auto& b : buffers_) b.data.assign(capacity_ * dim_, 0.0);
    prototypes_.resize(static_cast<std::size_t>(num_classes));
  }

  int num_classes() const noexcept { return num_classes_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  double ema_factor() const noexcept { return ema_factor_; }

  std::size_t size(int class_id) const { return buffer(class_id).count; }

  /// i-th entry of the class buffer in insertion order (0 = oldest retained).
  std::span<const double> embedding(int class_id, std::size_t i) const {
    const auto& b = buffer(class_id);
    if (i >= b.count) throw Error(ErrorKind::BadArg, "buffer index out of range");
    const std::size_t slot = (b.start + i) % capacity_;
    return {b.data.data() + slot * dim_, dim_};
  }

  std::vector<UnitVector> embeddings(int class_id) const {
    std::vector<UnitVector> out;
    out.reserve(size(class_id));
    for (std::size_t i = 0; i < size(class_id); ++i) {
      const auto e = embedding(class_id, i);
      out.push_back(UnitVector::adopt(Vec(e.begin(), e.end())));
    }
    return out;
  }

  void insert(int class_id, const UnitVector& z) { insert(class_id, z.coords()); }

  void insert(int class_id, std::span<const double> z) {
    auto& b = buffer_mut(class_id);
    if (z.size() != dim_) throw Error(ErrorKind::BadArg, "embedding has wrong dimension");
    const double n = norm(z);
    if (!(std::abs(n - 1.0) <= 1e-6)) {
      throw Error(ErrorKind::NotUnit, "embedding norm " + std::to_string(n) + " is not 1");
    }
    std::size_t slot;
    if (b.count < capacity_) {
      slot = (b.start + b.count) % capacity_;
      ++b.count;
    } else {
      slot = b.start;
      b.start = (b.start + 1) % capacity_;
    }
    auto dst = b.data.begin() + static_cast<std::ptrdiff_t>(slot * dim_);
    if (std::abs(n - 1.0) > 1e-12) {
      std::transform(z.begin(), z.end(), dst, [n](double x) { return x / n; });
    } else {
      std::copy(z.begin(), z.end(), dst);
    }
  }

  /// mu <- normalize(gamma * mu + (1 - gamma) * batch_mean); the first update
  /// initializes mu to normalize(batch_mean).
  void update_prototype(int class_id, std::span<const double> batch_mean) {
    if (size(class_id) == 0) {
      throw Error(ErrorKind::EmptyBuffer, "class " + std::to_string(class_id) + " has no embeddings");
    }
    if (batch_mean.size() != dim_) throw Error(ErrorKind::BadArg, "batch mean has wrong dimension");
    auto& proto = prototypes_[static_cast<std::size_t>(class_id)];
    Vec blended(batch_mean.begin(), batch_mean.end());
    if (proto) {
      for (std::size_t i = 0; i < dim_; ++i) {
        blended[i] = ema_factor_ * (*proto)[i] + (1.0 - ema_factor_) * batch_mean[i];
      }
    }
    proto = UnitVector::normalize(std::move(blended));
  }

  /// Inserts a labelled batch, then EMA-updates the prototype of every class
  /// present using the mean of that class's embeddings in the batch.
  void insert_batch(std::span<const UnitVector> batch, std::span<const int> labels) {
    if (batch.size() != labels.size()) throw Error(ErrorKind::BadArg, "labels/batch size mismatch");
    std::vector<Vec> sums(static_cast<std::size_t>(num_classes_), Vec(dim_, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      insert(labels[i], batch[i]);
      auto& s = sums[static_cast<std::size_t>(labels[i])];
      for (std::size_t j = 0; j < dim_; ++j) s[j] += batch[i][j];
      ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (int c = 0; c < num_classes_; ++c) {
      const auto n = counts[static_cast<std::size_t>(c)];
      if (n == 0) continue;
      auto& s = sums[static_cast<std::size_t>(c)];
      for (double& x : s) x /= static_cast<double>(n);
      update_prototype(c, s);
    }
  }

  bool has_prototype(int class_id) const {
    check_class(class_id);
    return prototypes_[static_cast<std::size_t>(class_id)].has_value();
  }

  const UnitVector& prototype(int class_id) const {
    check_class(class_id);
    const auto& p = prototypes_[static_cast<std::size_t>(class_id)];
    if (!p) {
      throw Error(ErrorKind::UndefinedPrototype,
                  "prototype of class " + std::to_string(class_id) + " is not defined yet");
    }
    return *p;
  }

  void set_prototype(int class_id, UnitVector mu) {
    check_class(class_id);
    if (mu.dim() != dim_) throw Error(ErrorKind::BadArg, "prototype has wrong dimension");
    prototypes_[static_cast<std::size_t>(class_id)] = std::move(mu);
  }

  /// k-th nearest buffered embedding of `class_id` to z by Euclidean distance.
  /// Ties are broken by the lower insertion index.
  KnnResult knn(int class_id, std::span<const double> z, std::size_t k) const {
    const auto& b = buffer(class_id);
    if (k < 1) throw Error(ErrorKind::BadArg, "k must be >= 1");
    if (b.count < k) {
      throw Error(ErrorKind::InsufficientData, "class " + std::to_string(class_id) + " holds " +
                                                   std::to_string(b.count) + " < k=" +
                                                   std::to_string(k) + " embeddings");
    }
    if (z.size() != dim_) throw Error(ErrorKind::BadArg, "query has wrong dimension");

    std::vector<std::pair<double, std::size_t>> dist(b.count);
    for (std::size_t i = 0; i < b.count; ++i) {
      const std::size_t slot = (b.start + i) % capacity_;
      dist[i] = {distance(z, {b.data.data() + slot * dim_, dim_}), i};
    }
    auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(dist.begin(), kth, dist.end());
    const auto e = embedding(class_id, kth->second);
    return {kth->first, UnitVector::adopt(Vec(e.begin(), e.end())), kth->second};
  }

  KnnResult knn(int class_id, const UnitVector& z, std::size_t k) const {
    return knn(class_id, z.coords(), k);
  }

  /// The n_adj classes other than `class_id` whose prototypes have the largest
  /// cosine similarity with its prototype, most similar first.
  std::vector<int> adjacent_clusters(int class_id, int n_adj) const {
    check_class(class_id);
    if (n_adj < 1 || n_adj > num_classes_ - 1) {
      throw Error(ErrorKind::BadArg, "n_adj must lie in [1, C-1], got " + std::to_string(n_adj));
    }
    const auto& mu = prototype(class_id);
    std::vector<std::pair<double, int>> sims;
    sims.reserve(static_cast<std::size_t>(num_classes_ - 1));
    for (int j = 0; j < num_classes_; ++j) {
      if (j == class_id) continue;
      sims.emplace_back(dot(mu.coords(), prototype(j).coords()), j);
    }
    std::stable_sort(sims.begin(), sims.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n_adj));
    for (int i = 0; i < n_adj; ++i) out.push_back(sims[static_cast<std::size_t>(i)].second);
    return out;
  }

  /// Normalized sum of the two prototypes.
  UnitVector midpoint(ClusterPair pair) const {
    const auto& a = prototype(pair.u);
    const auto& b = prototype(pair.v);
    Vec s(dim_);
    for (std::size_t i = 0; i < dim_; ++i) s[i] = a[i] + b[i];
    if (norm(s) < 1e-8) {
      throw Error(ErrorKind::AntipodalPrototypes, "prototypes of classes " + std::to_string(pair.u) +
                                                      " and " + std::to_string(pair.v) +
                                                      " are antipodal");
    }
    return UnitVector::normalize(std::move(s));
  }

  /// Every buffered embedding of every class, class-major, oldest first.
  std::vector<UnitVector> all_embeddings() const {
    std::vector<UnitVector> out;
    for (int c = 0; c < num_classes_; ++c) {
      auto e = embeddings(c);
      out.insert(out.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
    }
    return out;
  }

 private:
  struct Ring {
    Vec data;
    std::size_t start = 0;
    std::size_t count = 0;
  };

  void check_class(int class_id) const {
    if (class_id < 0 || class_id >= num_classes_) {
      throw Error(ErrorKind::BadClass, "class id " + std::to_string(class_id) + " out of range");
    }
  }
  const Ring& buffer(int class_id) const {
    check_class(class_id);
    return buffers_[static_cast<std::size_t>(class_id)];
  }
  Ring& buffer_mut(int class_id) {
    check_class(class_id);
    return buffers_[static_cast<std::size_t>(class_id)];
  }

  int num_classes_;
  std::size_t dim_;
  std::size_t capacity_;
  double ema_factor_;
  std::vector<Ring> buffers_;
  std::vector<std::optional<UnitVector>> prototypes_;
};

}  // namespace hamos
