// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rigid_qbnb/geometry.hpp"
#include "rigid_qbnb/random.hpp"

namespace rigid_qbnb {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(Skew, PlanarZeroAndAngle) {
  EXPECT_TRUE(skew<2>(RotationVec<2>(0.0)).isZero(0.0));
  Mat<2> expected;
  expected << 0, -0.7, 0.7, 0;
  EXPECT_EQ(skew<2>(RotationVec<2>(0.7)), expected);
}

TEST(Skew, SpatialLowerTriangleOrder) {
  Mat<3> expected;
  expected << 0, -1, -2, 1, 0, -3, 2, 3, 0;
  EXPECT_EQ(skew<3>(RotationVec<3>(1, 2, 3)), expected);
  EXPECT_EQ(unskew<3>(expected), RotationVec<3>(1, 2, 3));
}

TEST(Skew, RuntimeDimensionMismatchThrows) {
  EXPECT_THROW(skew(Eigen::VectorXd::Zero(3), 2), DimensionError);
  EXPECT_THROW(skew(Eigen::VectorXd::Zero(1), 3), DimensionError);
  EXPECT_EQ(skew(Eigen::Vector3d(1, 2, 3), 3), Eigen::MatrixXd(skew<3>(RotationVec<3>(1, 2, 3))));
}

TEST(ExpRotation, ClosedForms) {
  EXPECT_TRUE(exp_rotation<2>(RotationVec<2>(0.0)).isIdentity(0.0));
  EXPECT_TRUE(exp_rotation<3>(RotationVec<3>::Zero()).isIdentity(0.0));
  Mat<2> quarter;
  quarter << 0, -1, 1, 0;
  EXPECT_TRUE(exp_rotation<2>(RotationVec<2>(kPi / 2)).isApprox(quarter, 1e-15));
  EXPECT_LT((exp_rotation<2>(RotationVec<2>(kPi / 2)) - quarter).cwiseAbs().maxCoeff(), 1e-15);
  Mat<3> quarter3;
  quarter3 << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((exp_rotation<3>(RotationVec<3>(kPi / 2, 0, 0)) - quarter3).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ExpRotation, MatchesMatrixSeries) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    RotationVec<3> r(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    // Scaling and squaring with a long Taylor series as an independent reference.
    const Mat<3> k = skew<3>(r) / 64.0;
    Mat<3> term = Mat<3>::Identity();
    Mat<3> sum = Mat<3>::Identity();
    for (int j = 1; j < 30; ++j) {
      term = term * k / j;
      sum += term;
    }
    for (int s = 0; s < 6; ++s) sum = sum * sum;
    EXPECT_LT((exp_rotation<3>(r) - sum).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ExpRotation, OrthogonalWithUnitDeterminant) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    RotationVec<3> r(rng.normal(), rng.normal(), rng.normal());
    r *= rng.uniform(0.0, 10.0) / r.norm();
    const Mat<3> rot = exp_rotation<3>(r);
    EXPECT_LT((rot.transpose() * rot - Mat<3>::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(rot.determinant(), 1.0, 1e-12);
    EXPECT_LT((exp_rotation<3>(RotationVec<3>(-r)) - rot.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const RotationVec<2> r(rng.uniform(-10, 10));
    const Mat<2> rot = exp_rotation<2>(r);
    EXPECT_LT((rot.transpose() * rot - Mat<2>::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(rot.determinant(), 1.0, 1e-12);
  }
}

TEST(ExpRotation, TinyVectorsUseTaylorBranch) {
  const RotationVec<3> r(1e-10, -2e-10, 3e-10);
  const Mat<3> rot = exp_rotation<3>(r);
  EXPECT_LT((rot - (Mat<3>::Identity() + skew<3>(r))).cwiseAbs().maxCoeff(), 1e-19);
}

TEST(SkewNorms, OperatorAndFrobenius) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const RotationVec<3> r(rng.normal(), rng.normal(), rng.normal());
    const Mat<3> k = skew<3>(r);
    const double op = Eigen::JacobiSVD<Mat<3>>(k).singularValues()(0);
    EXPECT_LE(op, r.norm() + 1e-12);
    EXPECT_NEAR(op, r.norm(), 1e-9);
    EXPECT_NEAR(k.squaredNorm(), 2.0 * r.squaredNorm(), 1e-12 * (1.0 + r.squaredNorm()));
    const RotationVec<2> r2(rng.normal());
    const double op2 = Eigen::JacobiSVD<Mat<2>>(skew<2>(r2)).singularValues()(0);
    EXPECT_NEAR(op2, std::abs(r2(0)), 1e-9);
  }
}

TEST(LogRotation, InvertsExpInsideBall) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    RotationVec<3> r(rng.normal(), rng.normal(), rng.normal());
    r *= rng.uniform(0.0, kPi - 1e-6) / r.norm();
    EXPECT_LT((log_rotation<3>(exp_rotation<3>(r)) - r).norm(), 1e-8);
  }
  // Near and at pi: the vector may flip sign but must reproduce the rotation.
  for (double angle : {kPi - 1e-3, kPi - 1e-9, kPi}) {
    const RotationVec<3> r = angle * Vec<3>(1, 2, -2) / 3.0;
    const Mat<3> rot = exp_rotation<3>(r);
    const RotationVec<3> back = log_rotation<3>(rot);
    EXPECT_NEAR(back.norm(), angle, 1e-7);
    EXPECT_LT((exp_rotation<3>(back) - rot).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_NEAR(log_rotation<2>(exp_rotation<2>(RotationVec<2>(2.5)))(0), 2.5, 1e-15);
}

TEST(PointCloud, CachedNormsAndCloudNorms) {
  const PointCloud<2> p({Vec<2>(1, 0), Vec<2>(0, 1)});
  const auto n = cloud_norms(p);
  EXPECT_DOUBLE_EQ(n.frob, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(n.sum_norms, 2.0);
  const auto z = cloud_norms(PointCloud<2>({Vec<2>(0, 0)}));
  EXPECT_EQ(z.frob, 0.0);
  EXPECT_EQ(z.sum_norms, 0.0);
  EXPECT_THROW(cloud_norms(PointCloud<3>()), DegenerateInputError);
}

TEST(PointCloud, NormsMatchRecomputation) {
  SplitMix64 rng(21);
  const auto p = oracle::random_cloud<3>(rng, 1000, -5, 5);
  long double sq = 0.0L;
  long double lin = 0.0L;
  for (const auto& x : p) {
    sq += static_cast<long double>(x.squaredNorm());
    lin += std::sqrt(static_cast<long double>(x.squaredNorm()));
  }
  EXPECT_NEAR(p.frob_norm() * p.frob_norm(), static_cast<double>(sq), 1e-12 * static_cast<double>(sq));
  EXPECT_NEAR(p.sum_norms(), static_cast<double>(lin), 1e-12 * static_cast<double>(lin));
}

TEST(NormalizeCloud, CenterThenScale) {
  const auto r = normalize_cloud(PointCloud<2>({Vec<2>(2, 2), Vec<2>(4, 4)}));
  EXPECT_EQ(r.cloud[0], Vec<2>(-1, -1));
  EXPECT_EQ(r.cloud[1], Vec<2>(1, 1));
  EXPECT_EQ(r.transform.shift, Vec<2>(3, 3));
  EXPECT_EQ(r.transform.scale, 1.0);
}

TEST(NormalizeCloud, AlreadyNormalizedIsIdentity) {
  const PointCloud<2> p({Vec<2>(-1, 0.5), Vec<2>(1, -0.5)});
  const auto r = normalize_cloud(p);
  EXPECT_EQ(r.transform.shift, Vec<2>(0, 0));
  EXPECT_EQ(r.transform.scale, 1.0);
  EXPECT_EQ(r.cloud.points(), p.points());
}

TEST(NormalizeCloud, RandomCloudPostconditions) {
  SplitMix64 rng(2);
  const auto p = oracle::random_cloud<3>(rng, 50, 3, 9);
  const auto r = normalize_cloud(p);
  EXPECT_EQ(r.cloud.max_abs_coordinate(), 1.0);
  EXPECT_LT(r.cloud.mean().cwiseAbs().maxCoeff(), 1e-12);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_LT((r.transform.invert(r.cloud[i]) - p[i]).norm(), 1e-12);
  }
}

TEST(NormalizeCloud, DegenerateInputsThrow) {
  EXPECT_THROW(normalize_cloud(PointCloud<2>({Vec<2>(1, 1), Vec<2>(1, 1)})), DegenerateInputError);
  EXPECT_THROW(normalize_cloud(PointCloud<2>()), DegenerateInputError);
}

TEST(NormalizePair, SharedScaleKeepsRigidRelation) {
  SplitMix64 rng(4);
  const auto p = oracle::random_cloud<3>(rng, 30);
  const Mat<3> rot = exp_rotation<3>(RotationVec<3>(0.3, -1.0, 2.0));
  const auto q = PointCloud<3>(transform_points<3>(p, rot, Vec<3>(0.2, 0.1, -0.3)));
  const auto pair = normalize_pair(p, q);
  EXPECT_EQ(pair.source_transform.scale, pair.target_transform.scale);
  EXPECT_LE(std::max(pair.source.max_abs_coordinate(), pair.target.max_abs_coordinate()), 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_LT((rot * pair.source[i] - pair.target[i]).norm(), 1e-12);
}

TEST(Subdivide, OneDimensionalRoot) {
  Cube<1> root;
  root.half_edge = kPi;
  const auto kids = subdivide(root);
  ASSERT_EQ(kids.size(), 2u);
  EXPECT_DOUBLE_EQ(kids[0].center(0), -kPi / 2);
  EXPECT_DOUBLE_EQ(kids[1].center(0), kPi / 2);
  for (const auto& k : kids) {
    EXPECT_DOUBLE_EQ(k.half_edge, kPi / 2);
    EXPECT_EQ(k.generation, 1);
  }
}

TEST(Subdivide, OctantsOfUnitCube) {
  Cube<3> root;
  const auto kids = subdivide(root);
  ASSERT_EQ(kids.size(), 8u);
  for (const auto& k : kids) EXPECT_EQ(k.center.cwiseAbs(), Vec<3>::Constant(0.5));
}

TEST(Subdivide, SixDimensionalVolumes) {
  Cube<6> root;
  root.half_edge = kPi;
  const auto kids = subdivide(root);
  ASSERT_EQ(kids.size(), 64u);
  double vol = 0.0;
  for (const auto& k : kids) vol += k.volume();
  EXPECT_NEAR(vol, root.volume(), 1e-9 * root.volume());
}

TEST(Subdivide, HalfEdgeIsExactPowerOfTwo) {
  Cube<2> c;
  c.half_edge = kPi;
  for (int g = 1; g <= 40; ++g) {
    c = subdivide(c)[3];
    EXPECT_EQ(c.half_edge, std::ldexp(kPi, -g));
    EXPECT_EQ(c.generation, g);
  }
}

TEST(Subdivide, PartitionsTheParent) {
  SplitMix64 rng(9);
  Cube<3> root;
  root.center = Vec<3>(0.25, -1, 2);
  root.half_edge = 0.75;
  const auto kids = subdivide(root);
  for (int trial = 0; trial < 10000; ++trial) {
    Vec<3> x = oracle::random_in_cube(rng, root);
    // Put some samples exactly on internal faces.
    if (trial % 10 == 0) x(trial % 3) = root.center(trial % 3);
    int hits = 0;
    for (const auto& k : kids) hits += k.contains(x) ? 1 : 0;
    EXPECT_EQ(hits, 1);
  }
}

TEST(RigidMotion, ApplyAndReflect) {
  RigidMotion<2> m;
  m.rotation(0) = kPi / 2;
  m.translation = Vec<2>(1, 0);
  EXPECT_LT((m.apply(Vec<2>(1, 0)) - Vec<2>(1, 1)).norm(), 1e-15);
  const auto r = reflect_first_axis(PointCloud<2>({Vec<2>(1, 2)}));
  EXPECT_EQ(r[0], Vec<2>(-1, 2));
}

}  // namespace
}  // namespace rigid_qbnb
