#pragma once

// Geometry on the unit hypersphere S^{d-1}: unit vectors, tangent vectors,
// tangent projection and the exact geodesic flow used by the spherical
// Leapfrog integrator.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamos/error.hpp"

namespace hamos {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

// Norms at or below this are treated as zero when normalizing.
inline double zero_norm_threshold(std::size_t dim) {
  return std::sqrt(static_cast<double>(dim)) * std::numeric_limits<double>::epsilon();
}

/// A point on the unit hypersphere of dimension d >= 2.
///
/// Instances can only be produced by normalization or by a checked adoption of
/// coordinates that are already unit norm, so every live UnitVector satisfies
/// | ||z|| - 1 | <= 1e-9.
class UnitVector {
 public:
  UnitVector() = default;

  std::size_t dim() const noexcept { return coords_.size(); }
  std::span<const double> coords() const noexcept { return coords_; }
  const Vec& vec() const noexcept { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

  /// Adopts coordinates that are already unit norm. Fails with NotUnit if the
  /// norm is off by more than `tol`; anything off by more than 1e-12 is
  /// snapped back onto the sphere.
  static UnitVector adopt(Vec coords, double tol = 1e-6);

  /// Normalizes an arbitrary vector. Fails with ZeroVector on a (numerically)
  /// zero input.
  static UnitVector normalize(Vec v);

 private:
  explicit UnitVector(Vec coords) : coords_(std::move(coords)) {}
  Vec coords_;
};

inline UnitVector UnitVector::normalize(Vec v) {
  if (v.size() < 2) throw Error(ErrorKind::BadArg, "unit vectors need dimension >= 2");
  const double n = norm(v);
  if (!(n > zero_norm_threshold(v.size()))) {
    throw Error(ErrorKind::ZeroVector, "cannot normalize a zero-length vector");
  }
  for (double& x : v) x /= n;
  return UnitVector(std::move(v));
}

inline UnitVector UnitVector::adopt(Vec coords, double tol) {
  if (coords.size() < 2) throw Error(ErrorKind::BadArg, "unit vectors need dimension >= 2");
  const double n = norm(coords);
  if (!(std::abs(n - 1.0) <= tol)) {
    throw Error(ErrorKind::NotUnit, "vector norm " + std::to_string(n) + " is not 1");
  }
  if (std::abs(n - 1.0) > 1e-12) {
    for (double& x : coords) x /= n;
  }
  return UnitVector(std::move(coords));
}

inline UnitVector normalize(Vec v) { return UnitVector::normalize(std::move(v)); }

/// A vector in the tangent space at `base`.
struct TangentVector {
  Vec coords;
  UnitVector base;

  double norm() const { return hamos::norm(coords); }
};

/// (I - z z^T) q
inline TangentVector project_tangent(std::span<const double> q, const UnitVector& z) {
  assert(q.size() == z.dim());
  const double c = dot(q, z.coords());
  Vec out(q.begin(), q.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= c * z[i];
  return {std::move(out), z};
}

/// Exact geodesic flow for time `eps`: rotates (z, q) along the great circle
/// through z with direction q. Zero momentum is the identity step.
inline std::pair<UnitVector, TangentVector> geodesic_step(const UnitVector& z,
                                                          const TangentVector& q, double eps) {
  const double speed = q.norm();
  if (speed == 0.0) return {z, q};

  const double angle = speed * eps;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const std::size_t d = z.dim();

  Vec pos(d), mom(d);
  for (std::size_t i = 0; i < d; ++i) {
    pos[i] = z[i] * c + (q.coords[i] / speed) * s;
    mom[i] = -z[i] * speed * s + q.coords[i] * c;
  }
  // Renormalize every step; drift otherwise accumulates over L*R steps.
  UnitVector next = UnitVector::normalize(std::move(pos));
  return {next, TangentVector{std::move(mom), next}};
}

}  // namespace hamos
