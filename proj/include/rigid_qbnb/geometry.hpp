//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/numeric.hpp"

namespace rigid_qbnb {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

// Intrinsic dimension of SO(Dim).
template <int Dim>
inline constexpr int kRotDim = Dim * (Dim - 1) / 2;

template <int Dim>
using RotationVec = Vec<kRotDim<Dim>>;

template <int Dim>
concept SupportedDim = (Dim == 2 || Dim == 3);

// =============================================================================
// Exponential map
// =============================================================================

// Skew-symmetric matrix whose strictly-lower entries, read column-major as
// (2,1),(3,1),(3,2), are the components of r.
template <int Dim>
  requires SupportedDim<Dim>
Mat<Dim> skew(const RotationVec<Dim>& r) {
  Mat<Dim> k = Mat<Dim>::Zero();
  if constexpr (Dim == 2) {
    k(1, 0) = r(0);
    k(0, 1) = -r(0);
  } else {
    k(1, 0) = r(0);
    k(2, 0) = r(1);
    k(2, 1) = r(2);
    k(0, 1) = -r(0);
    k(0, 2) = -r(1);
    k(1, 2) = -r(2);
  }
  return k;
}

// Runtime-dimension variant for callers that only know d at runtime.
inline Eigen::MatrixXd skew(const Eigen::VectorXd& r, int dim) {
  if (dim == 2 && r.size() == 1) return skew<2>(Vec<1>(r(0)));
  if (dim == 3 && r.size() == 3) return skew<3>(Vec<3>(r(0), r(1), r(2)));
  throw DimensionError("rotation vector of length " + std::to_string(r.size()) +
                       " does not parameterize SO(" + std::to_string(dim) + ")");
}

// Inverse of skew(): reads r back from the lower triangle.
template <int Dim>
  requires SupportedDim<Dim>
RotationVec<Dim> unskew(const Mat<Dim>& k) {
  if constexpr (Dim == 2) {
    return RotationVec<Dim>(0.5 * (k(1, 0) - k(0, 1)));
  } else {
    return RotationVec<Dim>(0.5 * (k(1, 0) - k(0, 1)), 0.5 * (k(2, 0) - k(0, 2)),
                            0.5 * (k(2, 1) - k(1, 2)));
  }
}

// R_r = exp([r]).
template <int Dim>
  requires SupportedDim<Dim>
Mat<Dim> exp_rotation(const RotationVec<Dim>& r) {
  if constexpr (Dim == 2) {
    const double c = std::cos(r(0));
    const double s = std::sin(r(0));
    Mat<2> out;
    out << c, -s, s, c;
    return out;
  } else {
    const Mat<3> k = skew<3>(r);
    const Mat<3> k2 = k * k;
    const double theta = r.norm();
    if (theta < 1e-8) return Mat<3>::Identity() + k + 0.5 * k2;
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat<3>::Identity() + a * k + b * k2;
  }
}

// Matrix logarithm of a rotation: the rotation vector of minimal norm
// (angle in [0, pi]).
template <int Dim>
  requires SupportedDim<Dim>
RotationVec<Dim> log_rotation(const Mat<Dim>& rot) {
  if constexpr (Dim == 2) {
    return RotationVec<Dim>(std::atan2(rot(1, 0), rot(0, 0)));
  } else {
    const Mat<3> anti = 0.5 * (rot - rot.transpose());
    const RotationVec<3> v = unskew<3>(anti);
    const double sin_theta = v.norm();
    const double cos_theta = 0.5 * (rot.trace() - 1.0);
    const double theta = std::atan2(sin_theta, cos_theta);
    if (theta < 1e-4) {
      return (1.0 + theta * theta / 6.0) * v;
    }
    if (cos_theta > 0.0) {
      return (theta / sin_theta) * v;
    }
    // Near pi the antisymmetric part loses precision; recover the axis from
    // the symmetric part n n^T = (S - cos I) / (1 - cos).
    const Mat<3> sym = 0.5 * (rot + rot.transpose());
    const Mat<3> outer = (sym - cos_theta * Mat<3>::Identity()) / (1.0 - cos_theta);
    Eigen::Index k = 0;
    outer.diagonal().maxCoeff(&k);
    Vec<3> axis = outer.col(k) / std::sqrt(std::max(outer(k, k), 1e-300));
    axis.normalize();
    // hat(axis) expressed in our lower-triangle convention.
    Mat<3> hat;
    hat << 0, -axis(2), axis(1), axis(2), 0, -axis(0), -axis(1), axis(0), 0;
    RotationVec<3> r = theta * unskew<3>(hat);
    if (r.dot(v) < 0.0) r = -r;
    return r;
  }
}

// Rotation angle of R, i.e. the geodesic distance to the identity.
template <int Dim>
  requires SupportedDim<Dim>
double rotation_angle(const Mat<Dim>& rot) {
  return log_rotation<Dim>(rot).norm();
}

// =============================================================================
// Point clouds
// =============================================================================

template <int Dim>
  requires SupportedDim<Dim>
class PointCloud {
 public:
  using Point = Vec<Dim>;

  PointCloud() = default;

  explicit PointCloud(std::vector<Point> points) : points_(std::move(points)) {
    norms_.reserve(points_.size());
    CompensatedSum sq;
    CompensatedSum lin;
    for (const Point& p : points_) {
      const double n2 = p.squaredNorm();
      norms_.push_back(std::sqrt(n2));
      sq.add(n2);
      lin.add(norms_.back());
    }
    frob_norm_ = std::sqrt(sq.value());
    sum_norms_ = lin.value();
  }

  static constexpr int dim() { return Dim; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const { return points_; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  // Frobenius norm of the Dim x n matrix of points.
  double frob_norm() const { return frob_norm_; }
  // Sum of per-point Euclidean norms.
  double sum_norms() const { return sum_norms_; }
  const std::vector<double>& norms() const { return norms_; }

  Point mean() const {
    Point m;
    for (int k = 0; k < Dim; ++k) {
      CompensatedSum acc;
      for (const Point& p : points_) acc.add(p(k));
      m(k) = acc.value() / static_cast<double>(points_.size());
    }
    return m;
  }

  double max_abs_coordinate() const {
    double m = 0.0;
    for (const Point& p : points_) m = std::max(m, p.cwiseAbs().maxCoeff());
    return m;
  }

 private:
  std::vector<Point> points_;
  std::vector<double> norms_;
  double frob_norm_ = 0.0;
  double sum_norms_ = 0.0;
};

struct CloudNorms {
  double frob = 0.0;
  double sum_norms = 0.0;
};

template <int Dim>
CloudNorms cloud_norms(const PointCloud<Dim>& cloud) {
  if (cloud.empty()) throw DegenerateInputError("cloud_norms: empty point cloud");
  return {cloud.frob_norm(), cloud.sum_norms()};
}

// Affine map p -> (p - shift) * scale.
template <int Dim>
struct Normalization {
  Vec<Dim> shift = Vec<Dim>::Zero();
  double scale = 1.0;

  Vec<Dim> apply(const Vec<Dim>& p) const { return (p - shift) * scale; }
  Vec<Dim> invert(const Vec<Dim>& p) const { return p / scale + shift; }
};

template <int Dim>
PointCloud<Dim> apply_normalization(const PointCloud<Dim>& cloud, const Normalization<Dim>& norm) {
  std::vector<Vec<Dim>> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(norm.apply(p));
  return PointCloud<Dim>(std::move(out));
}

template <int Dim>
struct NormalizedCloud {
  PointCloud<Dim> cloud;
  Normalization<Dim> transform;
};

namespace detail {

template <int Dim>
double centered_max_abs(const PointCloud<Dim>& cloud, const Vec<Dim>& shift) {
  double m = 0.0;
  for (const auto& p : cloud) m = std::max(m, (p - shift).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace detail

// Centers the cloud and scales it uniformly so that max |coordinate| = 1.
template <int Dim>
NormalizedCloud<Dim> normalize_cloud(const PointCloud<Dim>& cloud) {
  if (cloud.empty()) throw DegenerateInputError("normalize_cloud: empty point cloud");
  Normalization<Dim> norm;
  norm.shift = cloud.mean();
  const double extent = detail::centered_max_abs(cloud, norm.shift);
  if (!(extent > 0.0)) throw DegenerateInputError("normalize_cloud: all points coincide");
  norm.scale = 1.0 / extent;
  return {apply_normalization(cloud, norm), norm};
}

template <int Dim>
struct NormalizedPair {
  PointCloud<Dim> source;
  PointCloud<Dim> target;
  Normalization<Dim> source_transform;
  Normalization<Dim> target_transform;
};

// Centers both clouds independently and applies one shared scale, so a rigid
// relation between them survives normalization.
template <int Dim>
NormalizedPair<Dim> normalize_pair(const PointCloud<Dim>& source, const PointCloud<Dim>& target) {
  if (source.empty() || target.empty()) {
    throw DegenerateInputError("normalize_pair: empty point cloud");
  }
  Normalization<Dim> ns;
  Normalization<Dim> nt;
  ns.shift = source.mean();
  nt.shift = target.mean();
  const double extent = std::max(detail::centered_max_abs(source, ns.shift),
                                 detail::centered_max_abs(target, nt.shift));
  if (!(extent > 0.0)) throw DegenerateInputError("normalize_pair: all points coincide");
  ns.scale = nt.scale = 1.0 / extent;
  return {apply_normalization(source, ns), apply_normalization(target, nt), ns, nt};
}

// Negates the first coordinate; composing with SO(d) covers O(d).
template <int Dim>
PointCloud<Dim> reflect_first_axis(const PointCloud<Dim>& cloud) {
  std::vector<Vec<Dim>> out(cloud.points());
  for (auto& p : out) p(0) = -p(0);
  return PointCloud<Dim>(std::move(out));
}

// =============================================================================
// Rigid motions
// =============================================================================

template <int Dim>
  requires SupportedDim<Dim>
struct RigidMotion {
  RotationVec<Dim> rotation = RotationVec<Dim>::Zero();
  Vec<Dim> translation = Vec<Dim>::Zero();

  static RigidMotion identity() { return {}; }

  Mat<Dim> rotation_matrix() const { return exp_rotation<Dim>(rotation); }
  Vec<Dim> apply(const Vec<Dim>& p) const { return rotation_matrix() * p + translation; }

  bool operator==(const RigidMotion&) const = default;
};

template <int Dim>
std::vector<Vec<Dim>> transform_points(const PointCloud<Dim>& cloud, const Mat<Dim>& rot,
                                       const Vec<Dim>& trans) {
  std::vector<Vec<Dim>> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(rot * p + trans);
  return out;
}

// =============================================================================
// Cubes
// =============================================================================

// Axis-aligned cube C_h(x). Membership is half-open on the upper faces so that
// subdivision partitions the parent.
template <int D>
struct Cube {
  Vec<D> center = Vec<D>::Zero();
  double half_edge = 1.0;
  int generation = 0;

  bool contains(const Vec<D>& x) const {
    for (int k = 0; k < D; ++k) {
      if (x(k) < center(k) - half_edge || x(k) >= center(k) + half_edge) return false;
    }
    return true;
  }

  // Closed-cube membership, used when a point sits exactly on the root boundary.
  bool contains_closed(const Vec<D>& x) const {
    return ((x - center).cwiseAbs().array() <= half_edge).all();
  }

  double volume() const { return std::pow(2.0 * half_edge, D); }

  // Distance from the center to a corner.
  double corner_distance() const { return std::sqrt(static_cast<double>(D)) * half_edge; }
};

template <int D>
std::vector<Cube<D>> subdivide(const Cube<D>& parent) {
  static_assert(D >= 1 && D <= 16);
  const double h = 0.5 * parent.half_edge;
  std::vector<Cube<D>> children;
  children.reserve(std::size_t{1} << D);
  for (unsigned mask = 0; mask < (1u << D); ++mask) {
    Cube<D> c;
    c.half_edge = h;
    c.generation = parent.generation + 1;
    for (int k = 0; k < D; ++k) {
      c.center(k) = parent.center(k) + (((mask >> k) & 1u) ? h : -h);
    }
    children.push_back(c);
  }
  return children;
}

// Root cube C_pi(0) of the rotation search.
template <int Dim>
Cube<kRotDim<Dim>> rotation_root() {
  Cube<kRotDim<Dim>> c;
  c.half_edge = std::numbers::pi;
  return c;
}

}  // namespace rigid_qbnb
