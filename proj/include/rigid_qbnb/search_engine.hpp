//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"
#include "rigid_qbnb/parallel.hpp"

namespace rigid_qbnb {

enum class SearchStatus {
  kConverged,    // ub - lb <= epsilon
  kMaxEvals,     // evaluation budget exhausted; lb is still a valid bound
  kAboveCutoff,  // every outstanding lower bound exceeds the caller's cutoff
};

inline const char* to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::kConverged: return "converged";
    case SearchStatus::kMaxEvals: return "max_evals";
    case SearchStatus::kAboveCutoff: return "above_cutoff";
  }
  return "unknown";
}

// One row of the per-generation record stream.
struct GenerationStats {
  int generation = 0;
  std::uint64_t evals = 0;
  std::uint64_t live = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = std::numeric_limits<double>::infinity();

  bool operator==(const GenerationStats&) const = default;
};

// What a problem reports for one cube: an attained objective value at (or
// derived from) the center, a (quasi-)lower bound over the cube, and how many
// objective evaluations that took.
template <class Payload>
struct Sample {
  double value = std::numeric_limits<double>::infinity();
  double lower = 0.0;
  std::uint64_t evals = 1;
  Payload payload{};
};

template <int D, class Payload>
struct Incumbent {
  Vec<D> x = Vec<D>::Zero();
  Sample<Payload> sample;
};

template <int D>
struct TraceEntry {
  Cube<D> cube;
  double value = 0.0;
  double lower = 0.0;
  bool kept = false;  // survived elimination (children were or will be generated)
};

struct EngineOptions {
  double epsilon = 1e-6;
  std::uint64_t max_evals = 100'000'000;
  int threads = 1;
  bool record_trace = false;
  // Best-first only: stop as soon as every outstanding lower bound is above
  // this value.
  double cutoff = std::numeric_limits<double>::infinity();
};

template <int D, class Payload>
struct EngineResult {
  Vec<D> minimizer = Vec<D>::Zero();
  Payload payload{};
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  std::uint64_t total_evals = 0;
  SearchStatus status = SearchStatus::kConverged;
  std::vector<GenerationStats> generations;
  std::vector<TraceEntry<D>> trace;
};

template <class P>
concept CubeProblem = requires(const P& p, const Cube<P::kDim>& c, double ub) {
  typename P::Payload;
  { p.evaluate(c, ub) } -> std::same_as<Sample<typename P::Payload>>;
};

namespace detail {

template <class P>
bool admits(const P& p, const Cube<P::kDim>& c) {
  if constexpr (requires { { p.admits(c) } -> std::convertible_to<bool>; }) {
    return p.admits(c);
  } else {
    return true;
  }
}

template <class Payload>
void check_sample(const Sample<Payload>& s) {
  if (std::isnan(s.value) || std::isnan(s.lower) || s.value == -std::numeric_limits<double>::infinity()) {
    throw Error("objective returned a non-finite value");
  }
}

template <class P, class Result>
bool offer(Result& result, const Vec<P::kDim>& x, const Sample<typename P::Payload>& s) {
  if (s.value < result.ub) {
    result.ub = s.value;
    result.minimizer = x;
    result.payload = s.payload;
    return true;
  }
  return false;
}

// Runs the optional local refinement hook on the incumbent; returns the
// evaluations it spent.
template <class P, class Result>
std::uint64_t refine_incumbent(const P& p, Result& result) {
  if constexpr (requires { p.refine(result.minimizer, result.payload, result.ub); }) {
    std::optional<Incumbent<P::kDim, typename P::Payload>> better =
        p.refine(result.minimizer, result.payload, result.ub);
    if (!better) return 0;
    const std::uint64_t spent = better->sample.evals;
    offer<P>(result, better->x, better->sample);
    return spent;
  } else {
    return 0;
  }
}

}  // namespace detail

// Breadth-first (q)BnB: every live cube of a generation is evaluated, the
// incumbent is merged by a min-reduction after the batch, lb is the minimum
// lower bound of the generation, and cubes with lower <= ub are split.
template <CubeProblem P>
EngineResult<P::kDim, typename P::Payload> run_bfs(const P& problem, const Cube<P::kDim>& root,
                                                   const EngineOptions& opt) {
  constexpr int D = P::kDim;
  using Payload = typename P::Payload;
  EngineResult<D, Payload> result;
  std::vector<Cube<D>> level{root};
  std::vector<Cube<D>> next;
  std::vector<Sample<Payload>> samples;
  while (true) {
    if (level.empty()) {
      result.lb = result.ub;
      result.status = SearchStatus::kConverged;
      break;
    }
    if (result.total_evals + level.size() > opt.max_evals) {
      result.status = SearchStatus::kMaxEvals;
      break;
    }
    const double ub_snapshot = result.ub;
    samples.assign(level.size(), Sample<Payload>{});
    parallel_for(level.size(), opt.threads,
                 [&](std::size_t i) { samples[i] = problem.evaluate(level[i], ub_snapshot); });

    GenerationStats gs;
    gs.generation = level.front().generation - root.generation;
    gs.live = level.size();
    for (std::size_t i = 0; i < level.size(); ++i) {
      detail::check_sample(samples[i]);
      gs.evals += samples[i].evals;
      detail::offer<P>(result, level[i].center, samples[i]);
      gs.lb = std::min(gs.lb, samples[i].lower);
    }
    result.total_evals += gs.evals;
    gs.ub = result.ub;
    result.lb = gs.lb;
    result.generations.push_back(gs);

    next.clear();
    for (std::size_t i = 0; i < level.size(); ++i) {
      const bool kept = samples[i].lower <= result.ub;
      if (opt.record_trace) {
        result.trace.push_back({level[i], samples[i].value, samples[i].lower, kept});
      }
      if (kept && result.ub - result.lb > opt.epsilon) {
        for (const auto& c : subdivide(level[i])) {
          if (detail::admits(problem, c)) next.push_back(c);
        }
      }
    }
    if (result.ub - result.lb <= opt.epsilon) {
      result.status = SearchStatus::kConverged;
      break;
    }
    level.swap(next);
  }
  return result;
}

// Best-first (q)BnB: the outstanding cube with the lowest lower bound is split
// next (ties by generation, then insertion order). Children of one split are
// evaluated as a batch against the same ub snapshot. Terminates when
// ub - (lowest outstanding lower bound) <= epsilon.
template <CubeProblem P>
EngineResult<P::kDim, typename P::Payload> run_best_first(
    const P& problem, const Cube<P::kDim>& root, const EngineOptions& opt,
    const std::optional<Incumbent<P::kDim, typename P::Payload>>& seed = std::nullopt) {
  constexpr int D = P::kDim;
  using Payload = typename P::Payload;
  EngineResult<D, Payload> result;

  struct Entry {
    double lower;
    int generation;
    std::uint64_t seq;
    Cube<D> cube;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.lower != b.lower) return a.lower > b.lower;
      if (a.generation != b.generation) return a.generation > b.generation;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap;
  std::uint64_t seq = 0;

  auto stats_at = [&](int generation) -> GenerationStats& {
    const auto g = static_cast<std::size_t>(generation - root.generation);
    if (result.generations.size() <= g) {
      const auto old = result.generations.size();
      result.generations.resize(g + 1);
      for (auto k = old; k <= g; ++k) result.generations[k].generation = static_cast<int>(k);
    }
    return result.generations[g];
  };
  // Refinement and seed evaluations are charged to the generation that
  // triggered them, so the per-generation counts sum to total_evals.
  auto charge = [&](int generation, std::uint64_t evals) {
    result.total_evals += evals;
    stats_at(generation).evals += evals;
  };
  auto record = [&](const Cube<D>& c, const Sample<Payload>& s, bool kept) {
    auto& gs = stats_at(c.generation);
    gs.evals += s.evals;
    gs.live += 1;
    gs.ub = result.ub;
    gs.lb = std::min(gs.lb, s.lower);
    if (opt.record_trace) result.trace.push_back({c, s.value, s.lower, kept});
  };

  if (seed) {
    charge(root.generation, seed->sample.evals);
    detail::offer<P>(result, seed->x, seed->sample);
  }
  {
    const Sample<Payload> s = problem.evaluate(root, result.ub);
    detail::check_sample(s);
    result.total_evals += s.evals;
    const bool improved = detail::offer<P>(result, root.center, s);
    if (improved) charge(root.generation, detail::refine_incumbent(problem, result));
    record(root, s, true);
    heap.push({s.lower, 0, seq++, root});
  }

  std::vector<Cube<D>> children;
  std::vector<Sample<Payload>> samples;
  while (true) {
    if (heap.empty()) {
      result.lb = result.ub;
      result.status = SearchStatus::kConverged;
      break;
    }
    const Entry top = heap.top();
    if (top.lower > result.ub) {
      heap.pop();
      continue;
    }
    result.lb = top.lower;
    if (result.ub - result.lb <= opt.epsilon) {
      result.status = SearchStatus::kConverged;
      break;
    }
    if (result.lb > opt.cutoff) {
      result.status = SearchStatus::kAboveCutoff;
      break;
    }
    if (result.total_evals >= opt.max_evals) {
      result.status = SearchStatus::kMaxEvals;
      break;
    }
    heap.pop();

    children.clear();
    for (const auto& c : subdivide(top.cube)) {
      if (detail::admits(problem, c)) children.push_back(c);
    }
    const double ub_snapshot = result.ub;
    samples.assign(children.size(), Sample<Payload>{});
    parallel_for(children.size(), opt.threads,
                 [&](std::size_t i) { samples[i] = problem.evaluate(children[i], ub_snapshot); });
    bool improved = false;
    for (std::size_t i = 0; i < children.size(); ++i) {
      detail::check_sample(samples[i]);
      result.total_evals += samples[i].evals;
      improved |= detail::offer<P>(result, children[i].center, samples[i]);
    }
    if (improved) charge(top.cube.generation + 1, detail::refine_incumbent(problem, result));
    for (std::size_t i = 0; i < children.size(); ++i) {
      const bool kept = samples[i].lower <= result.ub;
      record(children[i], samples[i], kept);
      if (kept) heap.push({samples[i].lower, children[i].generation, seq++, children[i]});
    }
  }
  if (result.lb > result.ub) result.lb = result.ub;
  return result;
}

}  // namespace rigid_qbnb
