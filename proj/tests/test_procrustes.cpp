// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rigid_qbnb/procrustes.hpp"
#include "rigid_qbnb/random.hpp"
#include "rigid_qbnb/synth.hpp"

namespace rigid_qbnb {
namespace {

template <int Dim>
double fixed_corr_energy(const PointCloud<Dim>& p, const PointCloud<Dim>& q, const Correspondence& c,
                         const RigidMotion<Dim>& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (m.apply(p[i]) - q[c.mapping[i]]).squaredNorm();
  return s / p.size();
}

TEST(Procrustes, IdentityOnSameCloud) {
  SplitMix64 rng(1);
  const auto p = oracle::random_cloud<3>(rng, 10);
  const auto r = procrustes(p, p, Correspondence::identity(10, true), true);
  EXPECT_LT(r.motion.rotation.norm(), 1e-12);
  EXPECT_LT(r.motion.translation.norm(), 1e-12);
  EXPECT_FALSE(r.ambiguous);
}

TEST(Procrustes, RecoversKnownMotion) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::random_cloud<3>(rng, 12);
    const auto m = random_rigid<3>(rng);
    if (m.rotation.norm() > std::numbers::pi - 1e-3) continue;  // log is two-valued at pi
    const auto q = PointCloud<3>(transform_points<3>(p, m.rotation_matrix(), m.translation));
    const auto r = procrustes(p, q, Correspondence::identity(12, true), true);
    EXPECT_LT((r.motion.rotation - m.rotation).norm(), 1e-9);
    EXPECT_LT((r.motion.translation - m.translation).norm(), 1e-9);
  }
  const auto p2 = oracle::random_cloud<2>(rng, 5);
  RigidMotion<2> m2;
  m2.rotation(0) = -2.0;
  const auto q2 = PointCloud<2>(transform_points<2>(p2, m2.rotation_matrix(), Vec<2>::Zero()));
  const auto r2 = procrustes(p2, q2, Correspondence::identity(5, true), false);
  EXPECT_NEAR(r2.motion.rotation(0), -2.0, 1e-9);
  EXPECT_EQ(r2.motion.translation, Vec<2>::Zero());
}

TEST(Procrustes, BeatsRandomPerturbations) {
  SplitMix64 rng(3);
  const auto p = oracle::random_cloud<3>(rng, 20);
  std::vector<Vec<3>> noisy;
  const auto truth = random_rigid<3>(rng);
  for (const auto& x : p) noisy.push_back(truth.apply(x) + 0.1 * Vec<3>(rng.normal(), rng.normal(), rng.normal()));
  const PointCloud<3> q(noisy);
  const auto c = Correspondence::identity(20, true);
  const auto best = procrustes(p, q, c, true).motion;
  const double e0 = fixed_corr_energy(p, q, c, best);
  for (int k = 0; k < 100; ++k) {
    RigidMotion<3> m = best;
    m.rotation += 0.05 * Vec<3>(rng.normal(), rng.normal(), rng.normal());
    m.translation += 0.05 * Vec<3>(rng.normal(), rng.normal(), rng.normal());
    EXPECT_LE(e0, fixed_corr_energy(p, q, c, m) + 1e-15);
  }
}

TEST(Procrustes, DegenerateCrossCovarianceFlagged) {
  // Collinear points: rotations about the line are all optimal.
  const PointCloud<3> p({Vec<3>(-1, 0, 0), Vec<3>(0, 0, 0), Vec<3>(1, 0, 0)});
  const auto r = procrustes(p, p, Correspondence::identity(3, true), true);
  EXPECT_TRUE(r.ambiguous);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT((r.motion.apply(p[i]) - p[i]).norm(), 1e-12);
}

TEST(Procrustes, InputChecks) {
  const PointCloud<3> p({Vec<3>(1, 0, 0), Vec<3>(0, 1, 0)});
  EXPECT_THROW(procrustes(p, p, Correspondence::identity(2, true), true), DegenerateInputError);
  const PointCloud<2> p2({Vec<2>(1, 0), Vec<2>(0, 1), Vec<2>(1, 1)});
  EXPECT_THROW(procrustes(p2, p2, Correspondence::identity(2, true), true), DimensionError);
}

TEST(Icp, FixedPointAtOptimum) {
  SplitMix64 rng(4);
  const auto p = oracle::random_cloud<3>(rng, 30);
  const auto m = random_rigid<3>(rng);
  const auto q = PointCloud<3>(transform_points<3>(p, m.rotation_matrix(), m.translation));
  const auto index = build_cp_index(q);
  const auto r = icp_refine_cp(p, index, m);
  EXPECT_LE(std::abs(r.energy.value - r.start_energy), 1e-12);
  EXPECT_LE(r.energy.value, 1e-12);
}

TEST(Icp, ConvergesFromNearTruth) {
  SplitMix64 rng(5);
  int converged = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = oracle::random_cloud<3>(rng, 50);
    const auto m = random_rigid<3>(rng);
    const auto q = PointCloud<3>(transform_points<3>(p, m.rotation_matrix(), m.translation));
    RigidMotion<3> start = m;
    Vec<3> dr(rng.normal(), rng.normal(), rng.normal());
    start.rotation += rng.uniform(0.0, 0.1) * dr / dr.norm();
    const auto r = icp_refine_cp(p, build_cp_index(q), start);
    converged += r.energy.value <= 1e-10 ? 1 : 0;
    const auto b = icp_refine_bijective(p, PointCloud<3>(transform_points<3>(p, m.rotation_matrix(), Vec<3>::Zero())),
                                        start.rotation);
    EXPECT_LE(b.energy.value, 1e-10);
  }
  EXPECT_EQ(converged, 20);
}

TEST(Icp, MonotoneFromAdversarialStarts) {
  SplitMix64 rng(6);
  const auto p = oracle::random_cloud<3>(rng, 40);
  const auto q = oracle::random_cloud<3>(rng, 40);
  const auto index = build_cp_index(q);
  for (int trial = 0; trial < 20; ++trial) {
    const auto start = random_rigid<3>(rng);
    // Replay the iteration and check each accepted step.
    IcpOptions opts;
    double prev = eval_F_cp(p, index, start).value;
    RigidMotion<3> m = start;
    for (int it = 1; it <= 30; ++it) {
      opts.max_iterations = it;
      const auto r = icp_refine_cp(p, index, start, opts);
      EXPECT_LE(r.energy.value, prev + 1e-15);
      prev = r.energy.value;
      m = r.motion;
    }
    EXPECT_LE(eval_F_cp(p, index, m).value, eval_F_cp(p, index, start).value);
    const auto b = icp_refine_bijective(p, q, start.rotation);
    EXPECT_LE(b.energy.value, b.start_energy);
  }
}

}  // namespace
}  // namespace rigid_qbnb
