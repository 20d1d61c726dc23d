#include <gtest/gtest.h>

#include "gsreg/error.hpp"
#include "gsreg/sim3.hpp"
#include "test_support.hpp"

using namespace gsreg;
using gsreg::testing::random_sim3;

namespace {

Eigen::Matrix4d as_matrix(const Sim3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = t.scale() * t.rotation_matrix();
  m.topRightCorner<3, 1>() = t.translation();
  return m;
}

}  // namespace

TEST(Sim3, IdentityLeavesPointsUnchanged) {
  const Eigen::Vector3d x(0.3, -2.0, 5.5);
  EXPECT_EQ(Sim3::identity().apply(x), x);
}

TEST(Sim3, ApplyMatchesHomogeneousMatrix) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Sim3 t = random_sim3(rng);
    const Eigen::Vector3d x = gsreg::testing::random_unit(rng) * 2.0;
    const Eigen::Vector4d h = as_matrix(t) * x.homogeneous();
    EXPECT_LT((t.apply(x) - h.head<3>()).norm(), 1e-12);
  }
}

TEST(Sim3, CompositionMatchesMatrixProductAndAppliesRightFirst) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const Sim3 a = random_sim3(rng), b = random_sim3(rng);
    const Sim3 ab = a * b;
    EXPECT_LT((as_matrix(ab) - as_matrix(a) * as_matrix(b)).norm(), 1e-11);
    const Eigen::Vector3d x(0.1 * i, -0.4, 1.0);
    EXPECT_LT((ab.apply(x) - a.apply(b.apply(x))).norm(), 1e-11);
  }
}

TEST(Sim3, CompositionIsAssociative) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Sim3 a = random_sim3(rng), b = random_sim3(rng), c = random_sim3(rng);
    EXPECT_LT(max_param_difference((a * b) * c, a * (b * c)), 1e-12 * 64);
  }
}

TEST(Sim3, InverseRoundTrips) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Sim3 a = random_sim3(rng);
    EXPECT_LT(max_param_difference(a * a.inverse(), Sim3::identity()), 1e-12 * 16);
    EXPECT_LT(max_param_difference(a.inverse() * a, Sim3::identity()), 1e-12 * 16);
    EXPECT_LT(max_param_difference(a.inverse().inverse(), a), 1e-12 * 16);
  }
}

TEST(Sim3, ScaleTwoDoublesPointsAboutOrigin) {
  const Sim3 t(2.0, Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero());
  EXPECT_EQ(t.apply({1.0, 1.0, 1.0}), Eigen::Vector3d(2.0, 2.0, 2.0));
}

TEST(Sim3, ParamsRoundTripIsExactAndCanonical) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Sim3 a = random_sim3(rng);
    const auto p = a.params();
    EXPECT_GE(p[1], 0.0);
    const Sim3 b = Sim3::from_params(p);
    EXPECT_EQ(b.params(), p);
  }
  // A negative-scalar quaternion describes the same rotation and is flipped.
  const Sim3 c = Sim3::from_params({1.0, -0.5, 0.5, 0.5, 0.5, 0, 0, 0});
  EXPECT_GT(c.rotation().w(), 0.0);
}

TEST(Sim3, RejectsInvalidParameters) {
  EXPECT_THROW(Sim3(0.0, Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero()), InvalidArgument);
  EXPECT_THROW(Sim3(-1.0, Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero()), InvalidArgument);
  EXPECT_THROW(Sim3::from_params({1.0, 2.0, 0, 0, 0, 0, 0, 0}), InvalidArgument);
  EXPECT_THROW(Sim3(1.0, Eigen::Matrix3d(Eigen::Matrix3d::Identity() * 1.1), Eigen::Vector3d::Zero()),
               InvalidArgument);
  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(0, 0) = -1;
  EXPECT_THROW(Sim3(1.0, reflect, Eigen::Vector3d::Zero()), InvalidArgument);
}

TEST(So3, ExpLogRoundTrip) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 3.1);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d w = gsreg::testing::random_unit(rng) * u(rng);
    EXPECT_LT((so3_log(so3_exp(w)) - w).norm(), 1e-10);
  }
  EXPECT_LT(so3_log(so3_exp(Eigen::Vector3d(1e-12, 0, 0))).norm(), 1e-11);
}

TEST(So3, ExpMatchesAngleAxis) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d axis = gsreg::testing::random_unit(rng);
    const double angle = 0.05 * i;
    const Eigen::Matrix3d ref = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    EXPECT_LT((so3_exp(axis * angle).toRotationMatrix() - ref).norm(), 1e-12);
    EXPECT_NEAR(rotation_angle_between(Eigen::Quaterniond::Identity(), so3_exp(axis * angle)), angle,
                1e-9);
  }
}

TEST(Sim3, RetractPerturbsRotationOnTheLeft) {
  std::mt19937_64 rng(8);
  const Sim3 a = random_sim3(rng);
  const Eigen::Vector3d w(0.01, -0.02, 0.03), dt(0.1, 0.2, -0.3);
  const Sim3 b = a.retract(0.1, w, dt);
  EXPECT_NEAR(b.scale(), a.scale() * std::exp(0.1), 1e-12);
  EXPECT_LT((b.rotation_matrix() - so3_exp(w).toRotationMatrix() * a.rotation_matrix()).norm(), 1e-12);
  EXPECT_LT((b.translation() - a.translation() - dt).norm(), 1e-12);
  EXPECT_NEAR(b.rotation().norm(), 1.0, 1e-12);
}

TEST(Sim3, RotationStaysUnitAfterManyRetractions) {
  std::mt19937_64 rng(9);
  Sim3 a = random_sim3(rng);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int i = 0; i < 10000; ++i) a = a.retract(n(rng), {n(rng), n(rng), n(rng)}, {n(rng), n(rng), n(rng)});
  EXPECT_NEAR(a.rotation().norm(), 1.0, 1e-9);
  EXPECT_GT(a.scale(), 0.0);
}
