//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rigid_qbnb/assignment.hpp"
#include "rigid_qbnb/distance_grid.hpp"
#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"
#include "rigid_qbnb/kd_tree.hpp"
#include "rigid_qbnb/numeric.hpp"

namespace rigid_qbnb {

// Source index i -> target index mapping[i].
struct Correspondence {
  std::vector<int> mapping;
  bool bijective = false;

  std::size_t size() const { return mapping.size(); }

  bool is_valid(std::size_t target_size) const {
    std::vector<char> seen(target_size, 0);
    for (int j : mapping) {
      if (j < 0 || static_cast<std::size_t>(j) >= target_size) return false;
      if (bijective) {
        if (seen[j]) return false;
        seen[j] = 1;
      }
    }
    return !bijective || mapping.size() == target_size;
  }

  static Correspondence identity(std::size_t n, bool bijective) {
    Correspondence c;
    c.bijective = bijective;
    c.mapping.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.mapping[i] = static_cast<int>(i);
    return c;
  }
};

struct EnergyEval {
  double value = 0.0;
  Correspondence corr;
  bool approximate = false;  // value came from the distance-grid lookup
};

enum class CpIndexMode { kExact, kDtGrid };

// Closest-point oracle over a target cloud: exact k-d tree, or a precomputed
// distance-grid lookup (approximate). Immutable after construction; queries
// are safe from any number of threads.
template <int Dim>
class CPIndex {
 public:
  struct Hit {
    int index = -1;
    double sq_dist = 0.0;
  };

  static constexpr int kDefaultGridResolution = 300;

  explicit CPIndex(PointCloud<Dim> target, CpIndexMode mode = CpIndexMode::kExact,
                   int grid_resolution = kDefaultGridResolution)
      : target_(std::move(target)), mode_(mode) {
    if (target_.empty()) throw DegenerateInputError("closest-point index over an empty cloud");
    if (mode_ == CpIndexMode::kExact) {
      tree_ = KdTree<Dim>(target_.points());
    } else {
      grid_ = std::make_shared<const DistanceGrid<Dim>>(target_.points(), grid_resolution);
    }
  }

  Hit nearest(const Vec<Dim>& x) const {
    if (mode_ == CpIndexMode::kExact) {
      const auto hit = tree_.nearest(x);
      return {hit.index, hit.sq_dist};
    }
    const auto look = grid_->lookup(x);
    return {look.index, (target_[look.index] - x).squaredNorm()};
  }

  bool approximate() const { return mode_ == CpIndexMode::kDtGrid; }
  CpIndexMode mode() const { return mode_; }
  const PointCloud<Dim>& target() const { return target_; }
  const DistanceGrid<Dim>* grid() const { return grid_.get(); }

 private:
  PointCloud<Dim> target_;
  CpIndexMode mode_;
  KdTree<Dim> tree_;
  std::shared_ptr<const DistanceGrid<Dim>> grid_;
};

template <int Dim>
CPIndex<Dim> build_cp_index(const PointCloud<Dim>& target, CpIndexMode mode = CpIndexMode::kExact,
                            int grid_resolution = CPIndex<Dim>::kDefaultGridResolution) {
  return CPIndex<Dim>(target, mode, grid_resolution);
}

// Mean squared closest-point distance of already-rotated points shifted by t.
template <int Dim>
double cp_energy(std::span<const Vec<Dim>> rotated, const Vec<Dim>& t, const CPIndex<Dim>& index) {
  CompensatedSum acc;
  for (const auto& x : rotated) acc.add(index.nearest(x + t).sq_dist);
  return acc.value() / static_cast<double>(rotated.size());
}

// Same, also writing the per-point residual norms ||x_i + t - q_pi(i)||.
template <int Dim>
double cp_energy(std::span<const Vec<Dim>> rotated, const Vec<Dim>& t, const CPIndex<Dim>& index,
                 std::span<double> residuals) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < rotated.size(); ++i) {
    const double d2 = index.nearest(rotated[i] + t).sq_dist;
    residuals[i] = std::sqrt(d2);
    acc.add(d2);
  }
  return acc.value() / static_cast<double>(rotated.size());
}

// F_CP(r, t) = (1/n) sum_i min_j ||R_r p_i + t - q_j||^2 with its arg-min map.
template <int Dim>
EnergyEval eval_F_cp(const PointCloud<Dim>& source, const CPIndex<Dim>& index,
                     const RigidMotion<Dim>& motion) {
  if (source.empty()) throw DegenerateInputError("eval_F_cp: empty source cloud");
  const Mat<Dim> rot = motion.rotation_matrix();
  EnergyEval out;
  out.approximate = index.approximate();
  out.corr.bijective = false;
  out.corr.mapping.resize(source.size());
  CompensatedSum acc;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto hit = index.nearest(rot * source[i] + motion.translation);
    out.corr.mapping[i] = hit.index;
    acc.add(hit.sq_dist);
  }
  out.value = acc.value() / static_cast<double>(source.size());
  return out;
}

template <int Dim>
Eigen::MatrixXd bijective_cost_matrix(const PointCloud<Dim>& source, const PointCloud<Dim>& target,
                                      const Mat<Dim>& rot) {
  const auto n = static_cast<Eigen::Index>(source.size());
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec<Dim> x = rot * source[i];
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (x - target[j]).squaredNorm();
  }
  return cost;
}

// F_bi(r) = min over permutations of (1/n) sum_i ||R_r p_i - q_pi(i)||^2.
template <int Dim>
EnergyEval eval_F_bi(const PointCloud<Dim>& source, const PointCloud<Dim>& target,
                     const RotationVec<Dim>& r) {
  if (source.size() != target.size()) {
    throw DimensionError("bijective matching needs equal point counts, got " +
                         std::to_string(source.size()) + " and " + std::to_string(target.size()));
  }
  if (source.empty()) throw DegenerateInputError("eval_F_bi: empty clouds");
  const auto assignment = solve_assignment(bijective_cost_matrix(source, target, exp_rotation<Dim>(r)));
  EnergyEval out;
  out.value = assignment.total_cost / static_cast<double>(source.size());
  out.corr.bijective = true;
  out.corr.mapping = assignment.permutation;
  return out;
}

}  // namespace rigid_qbnb
