//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"

namespace rigid_qbnb {

// Nearest-site lattice over [-extent, extent]^Dim, built with a separable
// Euclidean distance transform (lower envelope of parabolas per axis) that
// carries the site index along. Sites are rasterized to voxel centers, so a
// lookup names a site whose distance is within two cell diagonals of the
// true nearest distance.
template <int Dim>
class DistanceGrid {
 public:
  static constexpr double kDefaultExtent = 1.25;

  struct Lookup {
    int index = -1;
    bool outside = false;  // query was clamped onto the lattice
  };

  DistanceGrid() = default;

  DistanceGrid(const std::vector<Vec<Dim>>& sites, int resolution,
               double extent = kDefaultExtent)
      : n_(resolution), lo_(-extent), cell_(2.0 * extent / resolution) {
    if (resolution < 2) {
      throw Error("distance grid resolution must be >= 2, got " + std::to_string(resolution));
    }
    if (sites.empty()) throw DegenerateInputError("distance grid over an empty target cloud");
    std::size_t total = 1;
    for (int k = 0; k < Dim; ++k) total *= static_cast<std::size_t>(n_);
    nearest_.assign(total, -1);
    std::vector<float> dist(total, std::numeric_limits<float>::infinity());

    // Rasterize: one site per voxel, the one nearest the voxel center.
    std::vector<double> seat(total, std::numeric_limits<double>::infinity());
    for (int j = 0; j < static_cast<int>(sites.size()); ++j) {
      const auto cell = voxel_of(sites[j]).first;
      const std::size_t lin = linear(cell);
      const double d2 = (center_of(cell) - sites[j]).squaredNorm();
      if (d2 < seat[lin]) {
        seat[lin] = d2;
        nearest_[lin] = j;
        dist[lin] = 0.0f;
      }
    }

    std::vector<float> f(n_);
    std::vector<int> idx(n_);
    std::vector<int> v(n_);
    std::vector<double> z(n_ + 1);
    for (int axis = 0; axis < Dim; ++axis) {
      const std::size_t stride = stride_of(axis);
      const std::size_t lines = total / n_;
      for (std::size_t line = 0; line < lines; ++line) {
        const std::size_t base = line_base(line, axis);
        for (int x = 0; x < n_; ++x) {
          f[x] = dist[base + x * stride];
          idx[x] = nearest_[base + x * stride];
        }
        transform_line(f, idx, v, z);
        for (int x = 0; x < n_; ++x) {
          dist[base + x * stride] = f[x];
          nearest_[base + x * stride] = idx[x];
        }
      }
    }
  }

  int resolution() const { return n_; }
  double cell_size() const { return cell_; }
  double cell_diagonal() const { return cell_ * std::sqrt(static_cast<double>(Dim)); }

  Lookup lookup(const Vec<Dim>& x) const {
    const auto [cell, outside] = voxel_of(x);
    return {nearest_[linear(cell)], outside};
  }

 private:
  using Cell = std::array<int, Dim>;

  std::pair<Cell, bool> voxel_of(const Vec<Dim>& x) const {
    Cell c{};
    bool outside = false;
    for (int k = 0; k < Dim; ++k) {
      const double u = std::floor((x(k) - lo_) / cell_);
      if (!(u >= 0.0)) {
        c[k] = 0;
        outside = true;
      } else if (u >= n_) {
        c[k] = n_ - 1;
        outside = true;
      } else {
        c[k] = static_cast<int>(u);
      }
    }
    return {c, outside};
  }

  Vec<Dim> center_of(const Cell& c) const {
    Vec<Dim> p;
    for (int k = 0; k < Dim; ++k) p(k) = lo_ + (c[k] + 0.5) * cell_;
    return p;
  }

  std::size_t linear(const Cell& c) const {
    std::size_t lin = 0;
    for (int k = Dim - 1; k >= 0; --k) lin = lin * n_ + c[k];
    return lin;
  }

  std::size_t stride_of(int axis) const {
    std::size_t s = 1;
    for (int k = 0; k < axis; ++k) s *= n_;
    return s;
  }

  // Offset of the first voxel of the line-th line parallel to `axis`.
  std::size_t line_base(std::size_t line, int axis) const {
    const std::size_t stride = stride_of(axis);
    const std::size_t below = line % stride;
    const std::size_t above = line / stride;
    return below + above * stride * n_;
  }

  // 1-D squared distance transform of f (in cell units), carrying indices.
  void transform_line(std::vector<float>& f, std::vector<int>& idx, std::vector<int>& v,
                      std::vector<double>& z) const {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n_; ++q) {
      if (!std::isfinite(f[q])) continue;
      if (k < 0) {
        k = 0;
        v[0] = q;
        z[0] = -kInf;
        z[1] = kInf;
        continue;
      }
      double s = 0.0;
      while (true) {
        const int p = v[k];
        s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
        if (s <= z[k] && k > 0) {
          --k;
          continue;
        }
        break;
      }
      if (s <= z[k]) {
        // k == 0 and the new parabola dominates everywhere.
        v[0] = q;
        z[1] = kInf;
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = kInf;
    }
    if (k < 0) return;  // no sites on this line yet

    std::vector<float> fin(f);
    std::vector<int> iin(idx);
    int j = 0;
    for (int x = 0; x < n_; ++x) {
      while (z[j + 1] < x) ++j;
      const int p = v[j];
      f[x] = static_cast<float>(double(x - p) * (x - p) + fin[p]);
      idx[x] = iin[p];
    }
  }

  int n_ = 0;
  double lo_ = 0.0;
  double cell_ = 0.0;
  std::vector<int> nearest_;
};

}  // namespace rigid_qbnb
