//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"
#include "rigid_qbnb/numeric.hpp"

namespace rigid_qbnb {

// Quantities the bound formulas consume. f_star must be an upper bound on the
// global minimum whenever a CP quasi-bound is evaluated; any larger value
// gives a smaller (still valid) bound.
struct BoundParams {
  double n = 1.0;
  double sigma_p = 0.0;
  double sigma_q = 0.0;
  double sum_norms_p = 0.0;
  double f_star = std::numeric_limits<double>::infinity();
  int dim_d = 3;
  int dim_search = 3;

  template <int Dim>
  static BoundParams from_clouds(const PointCloud<Dim>& p, const PointCloud<Dim>& q, int dim_search) {
    BoundParams b;
    b.n = static_cast<double>(p.size());
    b.sigma_p = p.frob_norm();
    b.sigma_q = q.frob_norm();
    b.sum_norms_p = p.sum_norms();
    b.dim_d = Dim;
    b.dim_search = dim_search;
    return b;
  }
};

namespace detail {

inline void require_non_negative(double x, const char* what) {
  if (!(x >= 0.0)) throw Error(std::string(what) + " must be non-negative");
}

inline double clamp_bound(double value) { return value > 0.0 ? value : 0.0; }

}  // namespace detail

// psi_k(x) = e^x - sum_{j<k} x^j / j!, the Taylor remainder of exp.
inline double psi(int k, double x) {
  detail::require_non_negative(x, "psi argument");
  if (k == 1) return std::expm1(x);
  if (k != 2) throw Error("psi is only defined here for k in {1, 2}");
  if (x < 0.5) {
    // Series sum_{j>=2} x^j / j! avoids cancellation in expm1(x) - x.
    double term = 0.5 * x * x;
    double sum = 0.0;
    for (int j = 3; j < 40; ++j) {
      sum += term;
      term *= x / j;
      if (term <= 1e-17 * sum) break;
    }
    return sum;
  }
  return std::expm1(x) - x;
}

// Delta_*(delta) = (2/n) sigma_p sigma_q psi_2(delta) for the bijective energy.
inline double quasi_slack_bijective(double delta, const BoundParams& p) {
  detail::require_non_negative(delta, "delta");
  return 2.0 / p.n * p.sigma_p * p.sigma_q * psi(2, delta);
}

inline double quasi_lb_bijective(double f_at_center, double delta, const BoundParams& p) {
  return detail::clamp_bound(f_at_center - quasi_slack_bijective(delta, p));
}

// Delta_*(d1, d2) = (1/n) [2 psi_2(d1)(sigma_p^2 + sigma_p sqrt(n f*))
//                          + 2 d2 psi_1(d1) sum_i ||p_i|| + n d2^2].
inline double quasi_slack_cp(double delta1, double delta2, const BoundParams& p) {
  detail::require_non_negative(delta1, "delta1");
  detail::require_non_negative(delta2, "delta2");
  const double psi2 = psi(2, delta1);
  double rot_term = 0.0;
  if (psi2 > 0.0) {
    if (!std::isfinite(p.f_star)) return std::numeric_limits<double>::infinity();
    rot_term = 2.0 * psi2 * (p.sigma_p * p.sigma_p + p.sigma_p * std::sqrt(p.n * std::max(p.f_star, 0.0)));
  }
  const double cross = delta2 > 0.0 ? 2.0 * delta2 * psi(1, delta1) * p.sum_norms_p : 0.0;
  return (rot_term + cross + p.n * delta2 * delta2) / p.n;
}

inline double quasi_lb_cp(double f_at_center, double delta1, double delta2, const BoundParams& p) {
  return detail::clamp_bound(f_at_center - quasi_slack_cp(delta1, delta2, p));
}

// Outer (rotation-only) bound of the nested search: the joint slack at
// delta2 = 0 with delta1 = sqrt(s) h.
inline double quasi_slack_cp_rotation(double h, const BoundParams& p) {
  detail::require_non_negative(h, "half edge");
  const int s = p.dim_d * (p.dim_d - 1) / 2;
  return quasi_slack_cp(std::sqrt(static_cast<double>(s)) * h, 0.0, p);
}

inline double quasi_lb_cp_rotation(double ebar_at_center, double h, const BoundParams& p) {
  return detail::clamp_bound(ebar_at_center - quasi_slack_cp_rotation(h, p));
}

// Inner (translation-only) bound: for a fixed correspondence the energy is
// ||t - t*||^2 above its minimum, so the slack over a cube is d h^2.
inline double quasi_lb_cp_translation(double e_at_center, double h, int dim_d) {
  detail::require_non_negative(h, "half edge");
  return detail::clamp_bound(e_at_center - dim_d * h * h);
}

// Lipschitz slack L delta with L = (2/n) sigma_p sigma_q.
inline double linear_slack_bijective(double delta, const BoundParams& p) {
  detail::require_non_negative(delta, "delta");
  return 2.0 / p.n * p.sigma_p * p.sigma_q * delta;
}

inline double linear_lb_bijective(double f_at_center, double delta, const BoundParams& p) {
  return detail::clamp_bound(f_at_center - linear_slack_bijective(delta, p));
}

// (1/n) sum_i max(e_i - delta1 ||p_i|| - delta2, 0)^2, where e_i are the
// closest-point residuals at the cube center.
inline double linear_lb_cp(std::span<const double> point_norms, std::span<const double> residuals,
                           double delta1, double delta2) {
  detail::require_non_negative(delta1, "delta1");
  detail::require_non_negative(delta2, "delta2");
  if (point_norms.size() != residuals.size()) {
    throw DimensionError("linear_lb_cp: residual count does not match point count");
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double shrunk = residuals[i] - delta1 * point_norms[i] - delta2;
    if (shrunk > 0.0) acc.add(shrunk * shrunk);
  }
  return acc.value() / static_cast<double>(residuals.size());
}

template <int Dim>
double linear_lb_cp(const PointCloud<Dim>& source, std::span<const double> residuals, double delta1,
                    double delta2) {
  return linear_lb_cp(std::span<const double>(source.norms()), residuals, delta1, delta2);
}

}  // namespace rigid_qbnb
