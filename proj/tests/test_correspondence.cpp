// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rigid_qbnb/assignment.hpp"
#include "rigid_qbnb/correspondence.hpp"
#include "rigid_qbnb/random.hpp"

namespace rigid_qbnb {
namespace {

TEST(CpIndex, SinglePointAlwaysReturned) {
  const auto index = build_cp_index(PointCloud<3>({Vec<3>(0.1, 0.2, 0.3)}));
  SplitMix64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vec<3> x(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const auto hit = index.nearest(x);
    EXPECT_EQ(hit.index, 0);
    EXPECT_DOUBLE_EQ(hit.sq_dist, (x - Vec<3>(0.1, 0.2, 0.3)).squaredNorm());
  }
}

TEST(CpIndex, ExactAgreesWithBruteForce) {
  SplitMix64 rng(2);
  const auto q3 = oracle::random_cloud<3>(rng, 100);
  const auto q2 = oracle::random_cloud<2>(rng, 100);
  const auto i3 = build_cp_index(q3);
  const auto i2 = build_cp_index(q2);
  for (int k = 0; k < 1000; ++k) {
    const Vec<3> x(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    const auto [j, d] = oracle::nearest(q3, x);
    const auto hit = i3.nearest(x);
    EXPECT_EQ(hit.index, j);
    EXPECT_EQ(hit.sq_dist, d);
    const Vec<2> y(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    EXPECT_EQ(i2.nearest(y).index, oracle::nearest(q2, y).first);
  }
}

TEST(CpIndex, ExactTiesGoToLowestIndex) {
  // Duplicates and a grid of equidistant sites.
  const PointCloud<2> q({Vec<2>(1, 0), Vec<2>(-1, 0), Vec<2>(0, 1), Vec<2>(0, -1), Vec<2>(1, 0)});
  const auto index = build_cp_index(q);
  EXPECT_EQ(index.nearest(Vec<2>(0, 0)).index, 0);
  EXPECT_EQ(index.nearest(Vec<2>(2, 0)).index, 0);
  EXPECT_EQ(index.nearest(Vec<2>(-0.5, -0.5)).index, 1);
}

TEST(CpIndex, GridWithinTwoCellDiagonals) {
  SplitMix64 rng(3);
  const auto q = oracle::random_cloud<3>(rng, 100);
  const auto index = build_cp_index(q, CpIndexMode::kDtGrid, 300);
  ASSERT_TRUE(index.approximate());
  const double tol = 2.0 * (2.0 + 2.0 * 0.25) * std::sqrt(3.0) / 300.0;
  for (int k = 0; k < 1000; ++k) {
    const Vec<3> x(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
    const double exact = std::sqrt(oracle::nearest(q, x).second);
    const double approx = std::sqrt(index.nearest(x).sq_dist);
    EXPECT_GE(approx, exact - 1e-12);
    EXPECT_LE(approx, exact + tol);
  }
}

TEST(CpIndex, GridQueriesOutsideAreClampedConservatively) {
  const PointCloud<2> q({Vec<2>(0, 0), Vec<2>(0.9, 0.9)});
  const auto index = build_cp_index(q, CpIndexMode::kDtGrid, 64);
  const auto look = index.grid()->lookup(Vec<2>(5, 5));
  EXPECT_TRUE(look.outside);
  EXPECT_EQ(look.index, 1);
  // The reported distance is the exact distance to the named site.
  EXPECT_DOUBLE_EQ(index.nearest(Vec<2>(5, 5)).sq_dist, (Vec<2>(5, 5) - Vec<2>(0.9, 0.9)).squaredNorm());
}

TEST(CpIndex, RejectsBadInput) {
  EXPECT_THROW(build_cp_index(PointCloud<2>()), DegenerateInputError);
  EXPECT_THROW(build_cp_index(PointCloud<2>({Vec<2>(0, 0)}), CpIndexMode::kDtGrid, 1), Error);
}

TEST(EvalFcp, IdentityOnSameCloud) {
  SplitMix64 rng(4);
  const auto p = oracle::random_cloud<3>(rng, 40);
  const auto e = eval_F_cp(p, build_cp_index(p), RigidMotion<3>::identity());
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.corr.mapping, Correspondence::identity(40, false).mapping);
  EXPECT_FALSE(e.approximate);
}

TEST(EvalFcp, NearerOfTwoSites) {
  const PointCloud<2> p({Vec<2>(1, 0)});
  const PointCloud<2> q({Vec<2>(0, 0), Vec<2>(0, 2)});
  const auto e = eval_F_cp(p, build_cp_index(q), RigidMotion<2>::identity());
  EXPECT_EQ(e.value, 1.0);
  EXPECT_EQ(e.corr.mapping[0], 0);
}

TEST(EvalFcp, MatchesDoubleLoop) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::random_cloud<3>(rng, 20);
    const auto q = oracle::random_cloud<3>(rng, 30);
    const auto m = random_rigid<3>(rng);
    const double expected = oracle::cp_energy(p, q, m);
    const auto got = eval_F_cp(p, build_cp_index(q), m);
    EXPECT_NEAR(got.value, expected, 1e-12 * std::max(1.0, expected));
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_EQ(got.corr.mapping[i], oracle::nearest(q, Vec<3>(m.apply(p[i]))).first);
    }
  }
}

TEST(EvalFcp, GridValueNotFarBelowExact) {
  SplitMix64 rng(6);
  const auto p = oracle::random_cloud<2>(rng, 50);
  const auto q = oracle::random_cloud<2>(rng, 60);
  const auto grid = build_cp_index(q, CpIndexMode::kDtGrid, 300);
  const auto exact = build_cp_index(q);
  const double diag = grid.grid()->cell_diagonal();
  double max_norm = 0.0;
  for (const auto& x : p) max_norm = std::max(max_norm, x.norm());
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_rigid<2>(rng);
    const auto a = eval_F_cp(p, grid, m);
    EXPECT_TRUE(a.approximate);
    EXPECT_GE(a.value, eval_F_cp(p, exact, m).value - diag * (2.0 * max_norm + diag));
  }
}

TEST(Assignment, TwoByTwo) {
  Eigen::MatrixXd c(2, 2);
  c << 0, 1, 1, 0;
  auto a = solve_assignment(c);
  EXPECT_EQ(a.permutation, (std::vector<int>{0, 1}));
  EXPECT_EQ(a.total_cost, 0.0);
  c << 1, 0, 0, 1;
  a = solve_assignment(c);
  EXPECT_EQ(a.permutation, (std::vector<int>{1, 0}));
  EXPECT_EQ(a.total_cost, 0.0);
}

TEST(Assignment, MatchesEnumerationUpToSeven) {
  SplitMix64 rng(7);
  for (int n = 1; n <= 7; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::MatrixXd c(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) c(i, j) = rng.uniform(0, 10);
      }
      const double best = oracle::enumerate_assignment(c);
      EXPECT_NEAR(solve_assignment(c).total_cost, best, 1e-12 * best);
      EXPECT_NEAR(solve_assignment_hungarian(c).total_cost, best, 1e-12 * best);
    }
  }
}

TEST(Assignment, AuctionAgreesWithHungarianUpTo64) {
  SplitMix64 rng(8);
  for (int n : {8, 16, 33, 64}) {
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::MatrixXd c(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) c(i, j) = trial % 2 ? rng.uniform(0, 1) : std::floor(rng.uniform(0, 5));
      }
      const auto a = solve_assignment(c);
      const auto h = solve_assignment_hungarian(c);
      EXPECT_NEAR(a.total_cost, h.total_cost, 1e-12 * std::max(1.0, h.total_cost));
      std::vector<int> sorted = a.permutation;
      std::sort(sorted.begin(), sorted.end());
      for (int i = 0; i < n; ++i) EXPECT_EQ(sorted[i], i);
    }
  }
}

TEST(Assignment, RejectsBadMatrices) {
  EXPECT_THROW(solve_assignment(Eigen::MatrixXd::Zero(2, 3)), DimensionError);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
  c(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_assignment(c), Error);
  c(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_assignment(c), Error);
}

TEST(EvalFbi, SameCloudIdentity) {
  SplitMix64 rng(9);
  const auto p = oracle::random_cloud<3>(rng, 15);
  const auto e = eval_F_bi(p, p, RotationVec<3>::Zero());
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.corr.mapping, Correspondence::identity(15, true).mapping);
  EXPECT_TRUE(e.corr.is_valid(15));
}

TEST(EvalFbi, ExactRigidImage) {
  SplitMix64 rng(10);
  const auto p = oracle::random_cloud<3>(rng, 30);
  const RotationVec<3> r0(0.4, -1.2, 2.0);
  const auto q = PointCloud<3>(transform_points<3>(p, exp_rotation<3>(r0), Vec<3>::Zero()));
  EXPECT_LE(eval_F_bi(p, q, r0).value, 1e-12);
}

TEST(EvalFbi, MatchesPermutationEnumeration) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = oracle::random_cloud<2>(rng, 6);
    const auto q = oracle::random_cloud<2>(rng, 6);
    const RotationVec<2> r(rng.uniform(-3, 3));
    const double best = oracle::enumerate_assignment(bijective_cost_matrix(p, q, exp_rotation<2>(r))) / 6.0;
    const auto e = eval_F_bi(p, q, r);
    EXPECT_NEAR(e.value, best, 1e-12 * std::max(1.0, best));
    EXPECT_TRUE(e.corr.is_valid(6));
  }
}

TEST(EvalFbi, UnequalCountsRejected) {
  SplitMix64 rng(12);
  EXPECT_THROW(eval_F_bi(oracle::random_cloud<2>(rng, 4), oracle::random_cloud<2>(rng, 5), RotationVec<2>(0.0)),
               DimensionError);
}

TEST(Correspondence, Validity) {
  Correspondence c;
  c.bijective = true;
  c.mapping = {1, 0, 2};
  EXPECT_TRUE(c.is_valid(3));
  c.mapping = {1, 1, 2};
  EXPECT_FALSE(c.is_valid(3));
  c.bijective = false;
  EXPECT_TRUE(c.is_valid(3));
  c.mapping = {3};
  EXPECT_FALSE(c.is_valid(3));
}

}  // namespace
}  // namespace rigid_qbnb
