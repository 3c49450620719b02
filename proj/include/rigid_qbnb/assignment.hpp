//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/numeric.hpp"

namespace rigid_qbnb {

struct Assignment {
  std::vector<int> permutation;  // row i -> column permutation[i]
  double total_cost = 0.0;
};

namespace detail {

inline void check_cost_matrix(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) {
    throw DimensionError("assignment cost matrix must be square, got " +
                         std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()));
  }
  if (!cost.allFinite()) throw Error("assignment cost matrix has non-finite entries");
}

inline double permutation_cost(const Eigen::MatrixXd& cost, const std::vector<int>& perm) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < perm.size(); ++i) acc.add(cost(i, perm[i]));
  return acc.value();
}

}  // namespace detail

// Shortest-augmenting-path Hungarian method with row/column potentials,
// O(n^3), exact in floating point up to rounding of the potentials.
inline Assignment solve_assignment_hungarian(const Eigen::MatrixXd& cost) {
  detail::check_cost_matrix(cost);
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  if (n == 0) return out;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  out.permutation.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.permutation[match[j] - 1] = j - 1;
  out.total_cost = detail::permutation_cost(cost, out.permutation);
  return out;
}

// Forward auction with epsilon scaling (Gauss-Seidel bidding).
//
// Costs are rounded onto an integer lattice, then multiplied by n + 1 so that
// the final phase at eps = 1 satisfies eps < 1/n in the rounded units, which
// makes the returned permutation optimal for the rounded costs. The lattice
// step is range * (n + 1) / 2^52, i.e. far below 1e-9 for the cost ranges of
// normalized clouds, so the permutation is optimal to near double precision.
inline Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  detail::check_cost_matrix(cost);
  const int n = static_cast<int>(cost.rows());
  Assignment out;
  if (n == 0) return out;
  if (n == 1) {
    out.permutation = {0};
    out.total_cost = cost(0, 0);
    return out;
  }

  const double lo = cost.minCoeff();
  const double range = cost.maxCoeff() - lo;
  // Keep |benefit| * (n + 1) around 2^52, far below the int64 limit so that
  // prices never overflow.
  const double budget = 4503599627370496.0 / static_cast<double>(n + 1);
  const double scale = range > 0.0 ? budget / range : 1.0;

  const std::int64_t mult = n + 1;
  std::vector<std::int64_t> benefit(static_cast<std::size_t>(n) * n);
  std::int64_t max_benefit = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto b = -static_cast<std::int64_t>(std::llround((cost(i, j) - lo) * scale)) * mult;
      benefit[static_cast<std::size_t>(i) * n + j] = b;
      max_benefit = std::max(max_benefit, -b);
    }
  }

  std::vector<std::int64_t> price(n, 0);
  std::vector<int> owner(n, -1);   // object -> person
  std::vector<int> assigned(n, -1);  // person -> object
  std::int64_t eps = std::max<std::int64_t>(1, max_benefit / 8);
  constexpr std::int64_t kFactor = 6;

  std::deque<int> queue;
  while (true) {
    std::fill(owner.begin(), owner.end(), -1);
    std::fill(assigned.begin(), assigned.end(), -1);
    queue.clear();
    for (int i = 0; i < n; ++i) queue.push_back(i);
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      const std::int64_t* row = &benefit[static_cast<std::size_t>(i) * n];
      int best_j = -1;
      std::int64_t best = std::numeric_limits<std::int64_t>::min();
      std::int64_t second = std::numeric_limits<std::int64_t>::min();
      for (int j = 0; j < n; ++j) {
        const std::int64_t value = row[j] - price[j];
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      price[best_j] += best - second + eps;
      const int previous = owner[best_j];
      owner[best_j] = i;
      assigned[i] = best_j;
      if (previous >= 0) {
        assigned[previous] = -1;
        queue.push_back(previous);
      }
    }
    if (eps == 1) break;
    eps = std::max<std::int64_t>(1, eps / kFactor);
  }

  out.permutation = assigned;
  out.total_cost = detail::permutation_cost(cost, out.permutation);
  return out;
}

}  // namespace rigid_qbnb
