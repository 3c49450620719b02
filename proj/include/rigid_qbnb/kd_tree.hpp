//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "rigid_qbnb/geometry.hpp"

namespace rigid_qbnb {

// Static k-d tree over a fixed point set. Exact nearest-neighbor queries, ties
// resolved toward the lowest point index.
template <int Dim>
class KdTree {
 public:
  struct Hit {
    int index = -1;
    double sq_dist = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;

  explicit KdTree(const std::vector<Vec<Dim>>& points) : points_(points) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    if (!points_.empty()) build(0, static_cast<int>(points_.size()));
  }

  std::size_t size() const { return points_.size(); }

  Hit nearest(const Vec<Dim>& q) const {
    Hit best;
    if (!points_.empty()) search(0, q, best);
    return best;
  }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    int begin = 0;
    int end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Vec<Dim> lo = points_[order_[begin]];
    Vec<Dim> hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (!(hi(axis) > lo(axis))) return id;  // all points coincide

    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       const double va = points_[a](axis);
                       const double vb = points_[b](axis);
                       return va < vb || (va == vb && a < b);
                     });
    const double split = points_[order_[mid]](axis);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    Node& node = nodes_[id];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void search(int id, const Vec<Dim>& q, Hit& best) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 < best.sq_dist || (d2 == best.sq_dist && idx < best.index)) {
          best.sq_dist = d2;
          best.index = idx;
        }
      }
      return;
    }
    // Left holds coordinates <= split, right holds >= split.
    const double diff = q(node.axis) - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    // Equality keeps ties reachable on the far side.
    if (diff * diff <= best.sq_dist) search(far, q, best);
  }

  std::vector<Vec<Dim>> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace rigid_qbnb
