//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rigid_qbnb/correspondence.hpp"
#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"
#include "rigid_qbnb/parallel.hpp"
#include "rigid_qbnb/random.hpp"
#include "rigid_qbnb/search.hpp"

namespace rigid_qbnb {

enum class MatchMode { kCp, kBijective };

inline const char* to_string(MatchMode m) { return m == MatchMode::kCp ? "cp" : "bijective"; }

struct SynthSpec {
  std::size_t n = 50;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int dim = 3;
  MatchMode mode = MatchMode::kBijective;
  // Extra uniform target points appended to Q before shuffling (CP only).
  std::size_t extra_target_points = 0;

  void validate() const {
    if (dim != 2 && dim != 3) throw DimensionError("dimension must be 2 or 3, got " + std::to_string(dim));
    if (n < static_cast<std::size_t>(dim) + 1) {
      throw Error("need at least d+1 = " + std::to_string(dim + 1) + " points, got " + std::to_string(n));
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("sigma must be a non-negative finite number");
    if (mode == MatchMode::kBijective && extra_target_points != 0) {
      throw Error("bijective instances cannot have extra target points");
    }
  }
};

// Rotation uniform on SO(d): a uniform angle in 2D, a uniform unit quaternion
// (Shoemake's method) in 3D; translation uniform in [-0.5, 0.5]^d.
template <int Dim>
RigidMotion<Dim> random_rigid(SplitMix64& rng) {
  RigidMotion<Dim> m;
  if constexpr (Dim == 2) {
    m.rotation(0) = rng.uniform(-std::numbers::pi, std::numbers::pi);
  } else {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    const Eigen::Quaterniond q(b * std::cos(2.0 * std::numbers::pi * u3), a * std::sin(2.0 * std::numbers::pi * u2),
                               a * std::cos(2.0 * std::numbers::pi * u2), b * std::sin(2.0 * std::numbers::pi * u3));
    m.rotation = log_rotation<3>(q.normalized().toRotationMatrix());
  }
  for (int k = 0; k < Dim; ++k) m.translation(k) = rng.uniform(-0.5, 0.5);
  return m;
}

template <int Dim>
RigidMotion<Dim> random_rigid(std::uint64_t seed) {
  SplitMix64 rng(seed);
  return random_rigid<Dim>(rng);
}

template <int Dim>
struct SyntheticInstance {
  PointCloud<Dim> source;  // normalized P
  PointCloud<Dim> target;  // normalized Q
  RigidMotion<Dim> truth;  // Q ~ R P + t before normalization
  RigidMotion<Dim> normalized_truth;  // the same motion between the normalized clouds
  Normalization<Dim> source_transform;
  Normalization<Dim> target_transform;
  // target index j holds the image of source point origin[j], or -1 for an
  // extra point.
  std::vector<int> origin;
};

// P uniform in [-1, 1]^d; Q = R P + t + N(0, sigma^2 I), shuffled, then both
// clouds centered and scaled by one shared factor.
template <int Dim>
SyntheticInstance<Dim> gen_synthetic(const SynthSpec& spec) {
  spec.validate();
  if (spec.dim != Dim) throw DimensionError("spec dimension does not match the requested instance dimension");
  SplitMix64 rng(spec.seed);
  SyntheticInstance<Dim> out;
  out.truth = random_rigid<Dim>(rng);
  const Mat<Dim> rot = out.truth.rotation_matrix();

  std::vector<Vec<Dim>> p(spec.n);
  for (auto& x : p) {
    for (int k = 0; k < Dim; ++k) x(k) = rng.uniform(-1.0, 1.0);
  }
  std::vector<Vec<Dim>> q;
  q.reserve(spec.n + spec.extra_target_points);
  out.origin.clear();
  for (std::size_t i = 0; i < spec.n; ++i) {
    Vec<Dim> y = rot * p[i] + out.truth.translation;
    if (spec.sigma > 0.0) {
      for (int k = 0; k < Dim; ++k) y(k) += spec.sigma * rng.normal();
    }
    q.push_back(y);
    out.origin.push_back(static_cast<int>(i));
  }
  for (std::size_t e = 0; e < spec.extra_target_points; ++e) {
    Vec<Dim> y;
    for (int k = 0; k < Dim; ++k) y(k) = rng.uniform(-1.0, 1.0);
    q.push_back(rot * y + out.truth.translation);
    out.origin.push_back(-1);
  }
  // Fisher-Yates
  for (std::size_t j = q.size(); j > 1; --j) {
    const std::size_t k = rng.below(j);
    std::swap(q[j - 1], q[k]);
    std::swap(out.origin[j - 1], out.origin[k]);
  }

  const auto pair = normalize_pair(PointCloud<Dim>(std::move(p)), PointCloud<Dim>(std::move(q)));
  out.source = pair.source;
  out.target = pair.target;
  out.source_transform = pair.source_transform;
  out.target_transform = pair.target_transform;
  // (Q - mu_q) s = R (P - mu_p) s + s (R mu_p + t - mu_q)
  const double s = pair.source_transform.scale;
  out.normalized_truth.rotation = out.truth.rotation;
  out.normalized_truth.translation =
      s * (rot * pair.source_transform.shift + out.truth.translation - pair.target_transform.shift);
  return out;
}

// =============================================================================
// Per-generation statistics
// =============================================================================

struct GrowthFit {
  // Geometric mean of evals(g+1)/evals(g) over the last third of the
  // generations; empty when fewer than kMinGenerations were recorded.
  std::optional<double> rho;
  std::size_t generations = 0;
  std::uint64_t total_evals = 0;

  static constexpr std::size_t kMinGenerations = 6;
};

inline GrowthFit per_generation_stats(const std::vector<GenerationStats>& rows) {
  GrowthFit fit;
  fit.generations = rows.size();
  for (const auto& r : rows) fit.total_evals += r.evals;
  if (rows.size() < GrowthFit::kMinGenerations) return fit;
  const std::size_t span = (rows.size() + 2) / 3;
  double log_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t g = rows.size() - span; g < rows.size(); ++g) {
    if (rows[g - 1].evals == 0 || rows[g].evals == 0) continue;
    log_sum += std::log(static_cast<double>(rows[g].evals) / static_cast<double>(rows[g - 1].evals));
    ++count;
  }
  if (count > 0) fit.rho = std::exp(log_sum / static_cast<double>(count));
  return fit;
}

// =============================================================================
// Farthest-point subsampling and pairwise distances
// =============================================================================

// Greedy farthest-point sampling, starting from the point nearest the
// centroid; ties go to the lowest index.
template <int Dim>
PointCloud<Dim> farthest_point_subsample(const PointCloud<Dim>& cloud, std::size_t count) {
  if (count >= cloud.size()) return cloud;
  if (count == 0) throw Error("farthest_point_subsample: count must be positive");
  const Vec<Dim> centroid = cloud.mean();
  std::size_t current = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = (cloud[i] - centroid).squaredNorm();
    if (d < best) {
      best = d;
      current = i;
    }
  }
  std::vector<double> dist(cloud.size(), std::numeric_limits<double>::infinity());
  std::vector<Vec<Dim>> picked;
  picked.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    picked.push_back(cloud[current]);
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      dist[i] = std::min(dist[i], (cloud[i] - cloud[current]).squaredNorm());
      if (dist[i] > far) {
        far = dist[i];
        next = i;
      }
    }
    current = next;
  }
  return PointCloud<Dim>(std::move(picked));
}

template <int Dim>
struct PairwiseCell {
  bool ok = false;
  std::string error;
  double value = std::numeric_limits<double>::quiet_NaN();  // certified ub
  double lb = std::numeric_limits<double>::quiet_NaN();
  bool certificate_valid = false;
  bool reflected = false;
  RigidMotion<Dim> motion;
  std::uint64_t total_evals = 0;
};

template <int Dim>
struct PairwiseResult {
  std::size_t count = 0;
  std::vector<PairwiseCell<Dim>> cells;  // row-major count x count

  const PairwiseCell<Dim>& at(std::size_t i, std::size_t j) const { return cells[i * count + j]; }

  Eigen::MatrixXd distances() const {
    Eigen::MatrixXd d(count, count);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t j = 0; j < count; ++j) d(i, j) = at(i, j).value;
    }
    return d;
  }
};

// All-pairs bijective distances. Clouds are subsampled to the smallest count;
// cells run as independent jobs on `threads` workers, each search
// single-threaded.
template <int Dim>
PairwiseResult<Dim> pairwise_matrix(const std::vector<PointCloud<Dim>>& clouds, const SearchConfig& cfg,
                                    int threads = 1) {
  cfg.validate();
  if (clouds.size() < 2) throw Error("pairwise matrix needs at least two clouds");
  std::size_t common = clouds.front().size();
  for (const auto& c : clouds) common = std::min(common, c.size());
  // Each cloud is centered on its own mean; one scale is shared by all of
  // them so rigid copies stay rigid copies.
  std::vector<PointCloud<Dim>> prepared;
  prepared.reserve(clouds.size());
  double extent = 0.0;
  for (const auto& c : clouds) {
    auto sub = farthest_point_subsample(c, common);
    extent = std::max(extent, detail::centered_max_abs(sub, sub.mean()));
    prepared.push_back(std::move(sub));
  }
  if (!(extent > 0.0)) throw DegenerateInputError("pairwise matrix: all points coincide");
  for (auto& c : prepared) {
    Normalization<Dim> norm;
    norm.shift = c.mean();
    norm.scale = 1.0 / extent;
    c = apply_normalization(c, norm);
  }

  PairwiseResult<Dim> out;
  out.count = clouds.size();
  out.cells.resize(out.count * out.count);
  SearchConfig cell_cfg = cfg;
  cell_cfg.threads = 1;
  parallel_for(out.cells.size(), threads, [&](std::size_t k) {
    const std::size_t i = k / out.count;
    const std::size_t j = k % out.count;
    auto& cell = out.cells[k];
    if (i == j) {
      cell.ok = true;
      cell.value = cell.lb = 0.0;
      cell.certificate_valid = true;
      return;
    }
    try {
      const auto r = register_bijective(prepared[i], prepared[j], cell_cfg);
      cell.ok = true;
      cell.value = r.ub;
      cell.lb = r.lb;
      cell.certificate_valid = r.certificate_valid;
      cell.reflected = r.reflected;
      cell.motion = r.minimizer;
      cell.total_evals = r.total_evals;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  return out;
}

}  // namespace rigid_qbnb
