//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "rigid_qbnb/correspondence.hpp"
#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"

namespace rigid_qbnb {

template <int Dim>
struct ProcrustesResult {
  RigidMotion<Dim> motion;
  // Cross-covariance too degenerate for a unique optimum; the motion is still
  // a minimizer, picked by the SVD's sign convention.
  bool ambiguous = false;
};

// argmin over (R, t) in SO(d) x R^d of sum_i ||R p_i + t - q_corr(i)||^2,
// with t fixed to zero when solve_translation is false.
template <int Dim>
ProcrustesResult<Dim> procrustes(const PointCloud<Dim>& source, const PointCloud<Dim>& target,
                                 const Correspondence& corr, bool solve_translation) {
  if (corr.size() != source.size()) {
    throw DimensionError("procrustes: correspondence size " + std::to_string(corr.size()) +
                         " != source size " + std::to_string(source.size()));
  }
  if (source.size() < static_cast<std::size_t>(Dim)) {
    throw DegenerateInputError("procrustes needs at least d point pairs");
  }
  if (!corr.is_valid(target.size())) throw Error("procrustes: invalid correspondence");

  const double n = static_cast<double>(source.size());
  Vec<Dim> mean_p = Vec<Dim>::Zero();
  Vec<Dim> mean_q = Vec<Dim>::Zero();
  if (solve_translation) {
    for (std::size_t i = 0; i < source.size(); ++i) {
      mean_p += source[i];
      mean_q += target[corr.mapping[i]];
    }
    mean_p /= n;
    mean_q /= n;
  }
  Mat<Dim> cov = Mat<Dim>::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    cov += (source[i] - mean_p) * (target[corr.mapping[i]] - mean_q).transpose();
  }

  Eigen::JacobiSVD<Mat<Dim>> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat<Dim> u = svd.matrixU();
  const Mat<Dim> v = svd.matrixV();
  Vec<Dim> signs = Vec<Dim>::Ones();
  const bool flipped = (v * u.transpose()).determinant() < 0.0;
  if (flipped) signs(Dim - 1) = -1.0;
  const Mat<Dim> rot = v * signs.asDiagonal() * u.transpose();

  const auto& sv = svd.singularValues();
  const double tol = 1e-12 * std::max(sv(0), 1e-300);
  ProcrustesResult<Dim> out;
  out.ambiguous = sv(0) <= 1e-300 || (Dim > 1 && sv(Dim - 2) <= tol) ||
                  (flipped && sv(Dim - 2) - sv(Dim - 1) <= tol);
  out.motion.rotation = log_rotation<Dim>(rot);
  out.motion.translation = solve_translation ? Vec<Dim>(mean_q - rot * mean_p) : Vec<Dim>::Zero();
  return out;
}

template <int Dim>
struct IcpResult {
  RigidMotion<Dim> motion;
  EnergyEval energy;
  double start_energy = 0.0;
  int iterations = 0;
  std::uint64_t evaluations = 0;  // correspondence steps performed
};

struct IcpOptions {
  int max_iterations = 200;
  double min_decrease = 1e-12;
};

// Closest-point ICP: alternate eval_F_cp and procrustes. The energy sequence
// never increases; a step that fails to decrease is discarded.
template <int Dim>
IcpResult<Dim> icp_refine_cp(const PointCloud<Dim>& source, const CPIndex<Dim>& index,
                             const RigidMotion<Dim>& start, IcpOptions opts = {}) {
  IcpResult<Dim> out;
  out.motion = start;
  out.energy = eval_F_cp(source, index, start);
  out.start_energy = out.energy.value;
  out.evaluations = 1;
  if (source.size() < static_cast<std::size_t>(Dim)) return out;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const auto step = procrustes(source, index.target(), out.energy.corr, true);
    auto next = eval_F_cp(source, index, step.motion);
    ++out.evaluations;
    out.iterations = it + 1;
    const double decrease = out.energy.value - next.value;
    if (decrease > 0.0) {
      out.motion = step.motion;
      out.energy = std::move(next);
    }
    if (!(decrease >= opts.min_decrease)) break;
  }
  return out;
}

// Bijective ICP: alternate assignment and rotation-only procrustes.
template <int Dim>
IcpResult<Dim> icp_refine_bijective(const PointCloud<Dim>& source, const PointCloud<Dim>& target,
                                    const RotationVec<Dim>& start, IcpOptions opts = {}) {
  IcpResult<Dim> out;
  out.motion.rotation = start;
  out.energy = eval_F_bi(source, target, start);
  out.start_energy = out.energy.value;
  out.evaluations = 1;
  if (source.size() < static_cast<std::size_t>(Dim)) return out;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const auto step = procrustes(source, target, out.energy.corr, false);
    auto next = eval_F_bi(source, target, step.motion.rotation);
    ++out.evaluations;
    out.iterations = it + 1;
    const double decrease = out.energy.value - next.value;
    if (decrease > 0.0) {
      out.motion = step.motion;
      out.energy = std::move(next);
    }
    if (!(decrease >= opts.min_decrease)) break;
  }
  return out;
}

}  // namespace rigid_qbnb
