//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rigid_qbnb/bounds.hpp"
#include "rigid_qbnb/correspondence.hpp"
#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"
#include "rigid_qbnb/numeric.hpp"
#include "rigid_qbnb/procrustes.hpp"
#include "rigid_qbnb/search_engine.hpp"

namespace rigid_qbnb {

enum class BoundKind { kQuasi, kLinear };

// kAuto resolves to BFS for bijective matching and best-first (nested) for
// closest-point matching.
enum class Strategy { kAuto, kBfs, kBestFirst };

inline const char* to_string(BoundKind b) { return b == BoundKind::kQuasi ? "quasi" : "linear"; }

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kAuto: return "auto";
    case Strategy::kBfs: return "bfs";
    case Strategy::kBestFirst: return "best-first";
  }
  return "unknown";
}

struct SearchConfig {
  double epsilon = 1e-6;
  BoundKind bound = BoundKind::kQuasi;
  Strategy strategy = Strategy::kAuto;
  std::uint64_t max_evals = 100'000'000;
  bool allow_reflections = false;
  bool refine_with_icp = true;
  int threads = 1;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("epsilon must be a positive finite number");
    if (max_evals < 1) throw Error("max_evals must be at least 1");
    if (threads < 1) throw Error("threads must be at least 1");
  }
};

template <int Dim>
struct SearchResult {
  RigidMotion<Dim> minimizer;
  double ub = std::numeric_limits<double>::infinity();
  double lb = 0.0;
  Correspondence corr;
  std::vector<GenerationStats> generations;
  std::uint64_t total_evals = 0;
  bool certificate_valid = false;
  SearchStatus status = SearchStatus::kConverged;
  bool reflected = false;  // minimizer applies to the source with its first axis negated
  Strategy strategy = Strategy::kBfs;

  bool converged() const { return status == SearchStatus::kConverged; }

  std::vector<std::uint64_t> evals_per_generation() const {
    std::vector<std::uint64_t> out;
    out.reserve(generations.size());
    for (const auto& g : generations) out.push_back(g.evals);
    return out;
  }
};

struct NoPayload {
  bool operator==(const NoPayload&) const = default;
};

// =============================================================================
// Generic breadth-first driver over an arbitrary objective
// =============================================================================

template <int D>
class FunctionProblem {
 public:
  static constexpr int kDim = D;
  using Payload = NoPayload;
  using Objective = std::function<double(const Vec<D>&)>;
  // bound(F(center), corner distance) -> lower bound over the cube
  using BoundFn = std::function<double(double, double)>;

  FunctionProblem(Objective f, BoundFn bound) : f_(std::move(f)), bound_(std::move(bound)) {}

  Sample<NoPayload> evaluate(const Cube<D>& c, double /*ub*/) const {
    Sample<NoPayload> s;
    s.value = f_(c.center);
    s.lower = bound_(s.value, c.corner_distance());
    return s;
  }

 private:
  Objective f_;
  BoundFn bound_;
};

template <int D>
EngineResult<D, NoPayload> bfs_qbnb(typename FunctionProblem<D>::Objective f, const Cube<D>& root,
                                    typename FunctionProblem<D>::BoundFn bound, const SearchConfig& cfg,
                                    bool record_trace = false) {
  cfg.validate();
  const FunctionProblem<D> problem(std::move(f), std::move(bound));
  EngineOptions opt;
  opt.epsilon = cfg.epsilon;
  opt.max_evals = cfg.max_evals;
  opt.threads = cfg.threads;
  opt.record_trace = record_trace;
  return run_bfs(problem, root, opt);
}

// =============================================================================
// Rigid-bijective: search over rotation vectors, permutation by assignment
// =============================================================================

template <int Dim>
class BijectiveProblem {
 public:
  static constexpr int kDim = kRotDim<Dim>;
  using Payload = Correspondence;

  BijectiveProblem(const PointCloud<Dim>& source, const PointCloud<Dim>& target, BoundKind bound,
                   bool refine_with_icp = false)
      : source_(source),
        target_(target),
        bound_(bound),
        refine_(refine_with_icp),
        params_(BoundParams::from_clouds(source, target, kDim)) {
    if (source.size() != target.size()) {
      throw DimensionError("bijective matching needs equal point counts, got " +
                           std::to_string(source.size()) + " and " + std::to_string(target.size()));
    }
  }

  // Slack subtracted from F(center) for a cube with the given corner distance.
  double slack(double delta) const {
    return bound_ == BoundKind::kQuasi ? quasi_slack_bijective(delta, params_)
                                       : linear_slack_bijective(delta, params_);
  }

  Sample<Correspondence> evaluate(const Cube<kDim>& c, double /*ub*/) const {
    EnergyEval e = eval_F_bi(source_, target_, RotationVec<Dim>(c.center));
    Sample<Correspondence> s;
    s.value = e.value;
    s.lower = std::max(0.0, e.value - slack(c.corner_distance()));
    s.payload = std::move(e.corr);
    return s;
  }

  std::optional<Incumbent<kDim, Correspondence>> refine(const Vec<kDim>& x, const Correspondence&,
                                                         double ub) const {
    if (!refine_) return std::nullopt;
    const auto icp = icp_refine_bijective(source_, target_, RotationVec<Dim>(x));
    Incumbent<kDim, Correspondence> inc;
    inc.x = icp.motion.rotation;
    inc.sample.value = icp.energy.value;
    inc.sample.lower = 0.0;
    inc.sample.evals = icp.evaluations;
    inc.sample.payload = icp.energy.corr;
    if (!(inc.sample.value < ub)) inc.sample.value = std::numeric_limits<double>::infinity();
    return inc;
  }

  const BoundParams& params() const { return params_; }

 private:
  const PointCloud<Dim>& source_;
  const PointCloud<Dim>& target_;
  BoundKind bound_;
  bool refine_;
  BoundParams params_;
};

// =============================================================================
// Rigid-CP, joint BFS over (r, t): x = (r, pi * t) so the root is C_pi(0)
// =============================================================================

template <int Dim>
class JointCpProblem {
 public:
  static constexpr int kRot = kRotDim<Dim>;
  static constexpr int kDim = kRot + Dim;
  using Payload = Correspondence;
  static constexpr double kTranslationScale = std::numbers::pi;

  JointCpProblem(const PointCloud<Dim>& source, const CPIndex<Dim>& index, BoundKind bound)
      : source_(source), index_(index), bound_(bound), params_(BoundParams::from_clouds(source, index.target(), kRot)) {}

  static Cube<kDim> root() {
    Cube<kDim> c;
    c.half_edge = std::numbers::pi;
    return c;
  }

  static RigidMotion<Dim> motion_at(const Vec<kDim>& x) {
    RigidMotion<Dim> m;
    m.rotation = x.template head<kRot>();
    m.translation = x.template tail<Dim>() / kTranslationScale;
    return m;
  }

  static Vec<kDim> point_of(const RigidMotion<Dim>& m) {
    Vec<kDim> x;
    x.template head<kRot>() = m.rotation;
    x.template tail<Dim>() = m.translation * kTranslationScale;
    return x;
  }

  // Rotation and translation corner distances of a cube with half-edge h.
  static double delta_rotation(double h) { return std::sqrt(static_cast<double>(kRot)) * h; }
  static double delta_translation(double h) { return std::sqrt(static_cast<double>(Dim)) * h / kTranslationScale; }

  Sample<Correspondence> evaluate(const Cube<kDim>& c, double ub) const {
    const RigidMotion<Dim> m = motion_at(c.center);
    const Mat<Dim> rot = m.rotation_matrix();
    std::vector<double> residuals(source_.size());
    Sample<Correspondence> s;
    s.payload.bijective = false;
    s.payload.mapping.resize(source_.size());
    CompensatedSum acc;
    for (std::size_t i = 0; i < source_.size(); ++i) {
      const auto hit = index_.nearest(rot * source_[i] + m.translation);
      s.payload.mapping[i] = hit.index;
      residuals[i] = std::sqrt(hit.sq_dist);
      acc.add(hit.sq_dist);
    }
    s.value = acc.value() / static_cast<double>(source_.size());
    const double d1 = delta_rotation(c.half_edge);
    const double d2 = delta_translation(c.half_edge);
    if (bound_ == BoundKind::kQuasi) {
      BoundParams p = params_;
      p.f_star = std::min(ub, s.value);
      s.lower = quasi_lb_cp(s.value, d1, d2, p);
    } else {
      s.lower = linear_lb_cp(source_, residuals, d1, d2);
    }
    return s;
  }

  const BoundParams& params() const { return params_; }

 private:
  const PointCloud<Dim>& source_;
  const CPIndex<Dim>& index_;
  BoundKind bound_;
  BoundParams params_;
};

// =============================================================================
// Rigid-CP, nested search: inner BnB over t for a fixed rotation
// =============================================================================

// Minimizes G(t) = (1/n) sum_i max(dist(x_i + t, Q) - s_i, 0)^2 over C_1(0),
// where x_i are already-rotated source points. With s = 0 this is F_CP(r, .).
// The shrunk form (s_i > 0) lower-bounds F_CP over a whole rotation cube and
// drives the linear baseline's outer bound.
template <int Dim>
class TranslationProblem {
 public:
  static constexpr int kDim = Dim;
  using Payload = NoPayload;

  TranslationProblem(std::span<const Vec<Dim>> rotated, const CPIndex<Dim>& index, BoundKind bound,
                     std::span<const double> shrink = {})
      : rotated_(rotated), index_(index), bound_(bound), shrink_(shrink) {
    if (!shrink_.empty() && shrink_.size() != rotated_.size()) {
      throw DimensionError("translation search: shrink size does not match point count");
    }
    if (bound_ == BoundKind::kQuasi && !shrink_.empty()) {
      throw Error("translation search: the quadratic bound only applies to the unshrunk energy");
    }
  }

  static Cube<Dim> root() {
    Cube<Dim> c;
    c.half_edge = 1.0;
    return c;
  }

  double value_at(const Vec<Dim>& t) const { return evaluate_impl(t, 0.0).value; }

  Sample<NoPayload> evaluate(const Cube<Dim>& c, double /*ub*/) const {
    return evaluate_impl(c.center, c.half_edge);
  }

 private:
  Sample<NoPayload> evaluate_impl(const Vec<Dim>& t, double h) const {
    const double n = static_cast<double>(rotated_.size());
    const double delta2 = std::sqrt(static_cast<double>(Dim)) * h;
    CompensatedSum value;
    CompensatedSum lower;
    for (std::size_t i = 0; i < rotated_.size(); ++i) {
      const double d2 = index_.nearest(rotated_[i] + t).sq_dist;
      if (shrink_.empty() && bound_ == BoundKind::kQuasi) {
        value.add(d2);
        continue;
      }
      const double d = std::sqrt(d2);
      const double s = shrink_.empty() ? 0.0 : shrink_[i];
      if (shrink_.empty()) {
        value.add(d2);
      } else {
        const double g = d - s;
        if (g > 0.0) value.add(g * g);
      }
      const double gl = d - s - delta2;
      if (gl > 0.0) lower.add(gl * gl);
    }
    Sample<NoPayload> out;
    out.value = value.value() / n;
    out.lower = bound_ == BoundKind::kQuasi ? quasi_lb_cp_translation(out.value, h, Dim) : lower.value() / n;
    return out;
  }

  std::span<const Vec<Dim>> rotated_;
  const CPIndex<Dim>& index_;
  BoundKind bound_;
  std::span<const double> shrink_;
};

template <int Dim>
struct TranslationResult {
  Vec<Dim> translation = Vec<Dim>::Zero();
  double value = std::numeric_limits<double>::infinity();
  double lb = 0.0;
  std::uint64_t evals = 0;
  SearchStatus status = SearchStatus::kConverged;
};

namespace detail {

// Translation-only ICP from t = 0 on the unshrunk energy: a cheap, attained
// starting value for the inner search.
template <int Dim>
Incumbent<Dim, NoPayload> translation_seed(std::span<const Vec<Dim>> rotated, const CPIndex<Dim>& index,
                                           int steps = 5) {
  Vec<Dim> t = Vec<Dim>::Zero();
  const auto& target = index.target();
  const double n = static_cast<double>(rotated.size());
  std::uint64_t evals = 0;
  double best = std::numeric_limits<double>::infinity();
  Vec<Dim> best_t = t;
  for (int k = 0; k <= steps; ++k) {
    CompensatedSum acc;
    Vec<Dim> offset = Vec<Dim>::Zero();
    for (const auto& x : rotated) {
      const auto hit = index.nearest(x + t);
      acc.add(hit.sq_dist);
      offset += target[hit.index] - x;
    }
    ++evals;
    const double value = acc.value() / n;
    if (!(value < best)) break;
    best = value;
    best_t = t;
    t = offset / n;
  }
  Incumbent<Dim, NoPayload> inc;
  inc.x = best_t;
  inc.sample.value = best;
  inc.sample.evals = evals;
  return inc;
}

template <int Dim>
TranslationResult<Dim> translation_search(std::span<const Vec<Dim>> rotated, const CPIndex<Dim>& index,
                                          BoundKind bound, std::span<const double> shrink, double epsilon,
                                          double cutoff, std::uint64_t max_evals,
                                          const std::optional<Incumbent<Dim, NoPayload>>& seed) {
  const TranslationProblem<Dim> problem(rotated, index, bound, shrink);
  EngineOptions opt;
  opt.epsilon = epsilon;
  opt.cutoff = cutoff;
  opt.max_evals = max_evals;
  opt.threads = 1;
  const auto r = run_best_first(problem, TranslationProblem<Dim>::root(), opt, seed);
  TranslationResult<Dim> out;
  out.translation = r.minimizer;
  out.value = r.ub;
  out.lb = std::max(0.0, r.lb);
  out.evals = r.total_evals;
  out.status = r.status;
  return out;
}

}  // namespace detail

// epsilon/2-optimal translation for a fixed rotation over C_1(0). The
// minimizer is guaranteed inside C_1(0) when the source is centered and the
// target lies in [-1, 1]^d.
template <int Dim>
TranslationResult<Dim> inner_translation_search(const PointCloud<Dim>& source, const CPIndex<Dim>& index,
                                                const RotationVec<Dim>& r, const SearchConfig& cfg) {
  cfg.validate();
  const auto rotated = transform_points<Dim>(source, exp_rotation<Dim>(r), Vec<Dim>::Zero());
  const auto seed = detail::translation_seed<Dim>(rotated, index);
  return detail::translation_search<Dim>(rotated, index, cfg.bound, {}, 0.5 * cfg.epsilon,
                                         std::numeric_limits<double>::infinity(), cfg.max_evals, seed);
}

// Outer problem of the nested search: best-first over rotation cubes, each
// center's value being the inner translation optimum.
template <int Dim>
class NestedOuterProblem {
 public:
  static constexpr int kDim = kRotDim<Dim>;
  using Payload = RigidMotion<Dim>;

  NestedOuterProblem(const PointCloud<Dim>& source, const CPIndex<Dim>& index, const SearchConfig& cfg)
      : source_(source),
        index_(index),
        cfg_(cfg),
        params_(BoundParams::from_clouds(source, index.target(), kDim)) {}

  // Cubes entirely outside the ball of radius pi hold no needed rotation.
  bool admits(const Cube<kDim>& c) const {
    const Vec<kDim> gap = (c.center.cwiseAbs().array() - c.half_edge).max(0.0).matrix();
    return gap.norm() <= std::numbers::pi;
  }

  double rotation_slack(double h, double f_star) const {
    BoundParams p = params_;
    p.f_star = f_star;
    return quasi_slack_cp_rotation(h, p);
  }

  Sample<RigidMotion<Dim>> evaluate(const Cube<kDim>& c, double ub) const {
    const RotationVec<Dim> r = c.center;
    const auto rotated = transform_points<Dim>(source_, exp_rotation<Dim>(r), Vec<Dim>::Zero());
    const auto seed = detail::translation_seed<Dim>(rotated, index_);
    const double half_eps = 0.5 * cfg_.epsilon;
    Sample<RigidMotion<Dim>> s;
    s.payload.rotation = r;

    if (cfg_.bound == BoundKind::kQuasi) {
      const double f0 = std::min(ub, seed.sample.value);
      const double slack0 = rotation_slack(c.half_edge, f0);
      const double eps_in = std::max(half_eps, 0.5 * slack0);
      const auto inner = detail::translation_search<Dim>(rotated, index_, BoundKind::kQuasi, {}, eps_in,
                                                         ub + slack0, cfg_.max_evals, seed);
      const double slack = rotation_slack(c.half_edge, std::min(f0, inner.value));
      s.value = inner.value;
      s.lower = std::max(0.0, inner.lb - slack);
      s.evals = inner.evals;
      s.payload.translation = inner.translation;
      return s;
    }

    // Linear baseline: the value search provides ub candidates, the shrunk
    // search bounds F_CP over every (r, t) in the rotation cube.
    const auto inner = detail::translation_search<Dim>(rotated, index_, BoundKind::kLinear, {}, half_eps, ub,
                                                       cfg_.max_evals, seed);
    const double delta1 = std::sqrt(static_cast<double>(kDim)) * c.half_edge;
    std::vector<double> shrink(source_.norms());
    for (double& v : shrink) v *= delta1;
    const TranslationProblem<Dim> shrunk(rotated, index_, BoundKind::kLinear, shrink);
    Incumbent<Dim, NoPayload> shrunk_seed;
    shrunk_seed.x = inner.translation;
    shrunk_seed.sample.value = shrunk.value_at(inner.translation);
    const auto bound = detail::translation_search<Dim>(rotated, index_, BoundKind::kLinear, shrink, half_eps,
                                                       std::min(ub, inner.value), cfg_.max_evals, shrunk_seed);
    s.value = inner.value;
    s.lower = std::min(bound.lb, inner.value);
    s.evals = inner.evals + bound.evals;
    s.payload.translation = inner.translation;
    return s;
  }

  std::optional<Incumbent<kDim, RigidMotion<Dim>>> refine(const Vec<kDim>&, const RigidMotion<Dim>& motion,
                                                          double ub) const {
    if (!cfg_.refine_with_icp) return std::nullopt;
    const auto icp = icp_refine_cp(source_, index_, motion);
    Incumbent<kDim, RigidMotion<Dim>> inc;
    inc.x = icp.motion.rotation;
    inc.sample.value = icp.energy.value < ub ? icp.energy.value : std::numeric_limits<double>::infinity();
    inc.sample.evals = icp.evaluations;
    inc.sample.payload = icp.motion;
    return inc;
  }

  const BoundParams& params() const { return params_; }

 private:
  const PointCloud<Dim>& source_;
  const CPIndex<Dim>& index_;
  SearchConfig cfg_;
  BoundParams params_;
};

// =============================================================================
// Entry points
// =============================================================================

namespace detail {

inline EngineOptions engine_options(const SearchConfig& cfg) {
  EngineOptions opt;
  opt.epsilon = cfg.epsilon;
  opt.max_evals = cfg.max_evals;
  opt.threads = cfg.threads;
  return opt;
}

template <int Dim>
SearchResult<Dim> merge_reflected(SearchResult<Dim> direct, SearchResult<Dim> mirrored) {
  SearchResult<Dim> out = mirrored.ub < direct.ub ? mirrored : direct;
  out.reflected = mirrored.ub < direct.ub;
  out.lb = std::min(direct.lb, mirrored.lb);
  out.total_evals = direct.total_evals + mirrored.total_evals;
  out.certificate_valid = direct.certificate_valid && mirrored.certificate_valid;
  out.status = direct.status != SearchStatus::kConverged ? direct.status : mirrored.status;
  const std::size_t len = std::max(direct.generations.size(), mirrored.generations.size());
  out.generations.assign(len, GenerationStats{});
  for (std::size_t g = 0; g < len; ++g) {
    auto& row = out.generations[g];
    row.generation = static_cast<int>(g);
    for (const auto* src : {&direct.generations, &mirrored.generations}) {
      if (g >= src->size()) continue;
      const auto& in = (*src)[g];
      row.evals += in.evals;
      row.live += in.live;
      row.ub = std::min(row.ub, in.ub);
      row.lb = std::min(row.lb, in.lb);
    }
  }
  return out;
}

template <int Dim>
SearchResult<Dim> bijective_once(const PointCloud<Dim>& source, const PointCloud<Dim>& target,
                                 const SearchConfig& cfg) {
  const bool best_first = cfg.strategy == Strategy::kBestFirst;
  const BijectiveProblem<Dim> problem(source, target, cfg.bound, best_first && cfg.refine_with_icp);
  const auto opt = engine_options(cfg);
  const auto root = rotation_root<Dim>();
  const auto r = best_first ? run_best_first(problem, root, opt) : run_bfs(problem, root, opt);
  SearchResult<Dim> out;
  out.minimizer.rotation = r.minimizer;
  out.ub = r.ub;
  out.lb = r.lb;
  out.corr = r.payload;
  out.generations = r.generations;
  out.total_evals = r.total_evals;
  out.status = r.status;
  out.certificate_valid = r.status == SearchStatus::kConverged;
  out.strategy = best_first ? Strategy::kBestFirst : Strategy::kBfs;
  return out;
}

template <int Dim>
SearchResult<Dim> cp_once(const PointCloud<Dim>& source, const CPIndex<Dim>& index, const SearchConfig& cfg) {
  SearchResult<Dim> out;
  const auto opt = engine_options(cfg);
  if (cfg.strategy == Strategy::kBfs) {
    const JointCpProblem<Dim> problem(source, index, cfg.bound);
    const auto r = run_bfs(problem, JointCpProblem<Dim>::root(), opt);
    out.minimizer = JointCpProblem<Dim>::motion_at(r.minimizer);
    out.ub = r.ub;
    out.lb = r.lb;
    out.corr = r.payload;
    out.generations = r.generations;
    out.total_evals = r.total_evals;
    out.status = r.status;
    out.strategy = Strategy::kBfs;
  } else {
    const NestedOuterProblem<Dim> problem(source, index, cfg);
    const auto r = run_best_first(problem, rotation_root<Dim>(), opt);
    out.minimizer = r.payload;
    out.ub = r.ub;
    out.lb = r.lb;
    out.corr = eval_F_cp(source, index, out.minimizer).corr;
    out.generations = r.generations;
    out.total_evals = r.total_evals;
    out.status = r.status;
    out.strategy = Strategy::kBestFirst;
  }
  out.certificate_valid = out.status == SearchStatus::kConverged && !index.approximate();
  return out;
}

}  // namespace detail

// Globally optimal rotation (no translation) and permutation between equal-size
// clouds. Both clouds are expected centered.
template <int Dim>
SearchResult<Dim> register_bijective(const PointCloud<Dim>& source, const PointCloud<Dim>& target,
                                     const SearchConfig& cfg) {
  cfg.validate();
  auto direct = detail::bijective_once(source, target, cfg);
  if (!cfg.allow_reflections) return direct;
  const auto mirrored_source = reflect_first_axis(source);
  return detail::merge_reflected(std::move(direct), detail::bijective_once(mirrored_source, target, cfg));
}

// Globally optimal rigid motion under closest-point matching. Expects the
// source centered and both clouds inside [-1, 1]^d.
template <int Dim>
SearchResult<Dim> register_cp(const PointCloud<Dim>& source, const CPIndex<Dim>& index, const SearchConfig& cfg) {
  cfg.validate();
  auto direct = detail::cp_once(source, index, cfg);
  if (!cfg.allow_reflections) return direct;
  const auto mirrored_source = reflect_first_axis(source);
  return detail::merge_reflected(std::move(direct), detail::cp_once(mirrored_source, index, cfg));
}

// Best-first nested search regardless of cfg.strategy.
template <int Dim>
SearchResult<Dim> nested_cp_search(const PointCloud<Dim>& source, const CPIndex<Dim>& index, SearchConfig cfg) {
  cfg.strategy = Strategy::kBestFirst;
  return register_cp(source, index, cfg);
}

}  // namespace rigid_qbnb
