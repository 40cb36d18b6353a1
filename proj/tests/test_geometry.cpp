#include "gaterace/geometry.hpp"
#include "gaterace/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace gaterace;

namespace {

constexpr double kPi = std::numbers::pi;

Vec4 random_polar(Rng& rng) {
  return {rng.uniform(0.3, 25.0), rng.uniform(0.0, kPi), rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)};
}

// Central-difference Jacobian of the conversion, the oracle for the analytic one.
Mat4 numeric_jacobian(const Vec4& x, double h = 1e-6) {
  Mat4 j;
  for (int c = 0; c < 4; ++c) {
    Vec4 step = Vec4::Zero();
    step[c] = h;
    j.col(c) = (polar_to_cartesian(x + step) - polar_to_cartesian(x - step)) / (2.0 * h);
  }
  return j;
}

}  // namespace

TEST(WrapAngle, Examples) {
  EXPECT_NEAR(wrap_angle(3.0 * kPi / 2.0), -kPi / 2.0, 1e-15);
  EXPECT_EQ(wrap_angle(kPi), kPi);
  EXPECT_EQ(wrap_angle(-kPi), kPi);
  EXPECT_EQ(wrap_angle(0.25), 0.25);
  EXPECT_NEAR(wrap_angle(7.0 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(-3.0 * kPi), kPi, 1e-12);
}

TEST(WrapAngle, RejectsNonFinite) {
  EXPECT_THROW(wrap_angle(std::numeric_limits<double>::quiet_NaN()), GeometryError);
  EXPECT_THROW(wrap_angle(std::numeric_limits<double>::infinity()), GeometryError);
}

TEST(WrapAngle, RangeCongruenceAndIdempotence) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(-100.0, 100.0);
    const double w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    const double turns = (a - w) / (2.0 * kPi);
    EXPECT_NEAR(turns, std::round(turns), 1e-9);
    EXPECT_EQ(wrap_angle(w), w);
  }
}

TEST(Rotation, YawRotationIsOrthonormal) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double yaw = rng.uniform(-kPi, kPi);
    const Rot3 r = yaw_rotation(yaw);
    EXPECT_LT((r.transpose() * r - Rot3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    EXPECT_NEAR(wrap_angle(yaw_of(r) - yaw), 0.0, 1e-12);
  }
}

TEST(PolarToCartesian, Examples) {
  EXPECT_LT((polar_to_cartesian(Vec4(2.0, kPi / 2, 0.0, 0.3)) - Vec4(2, 0, 0, 0.3)).norm(), 1e-12);
  EXPECT_LT((polar_to_cartesian(Vec4(1.0, 0.0, 0.7, 0.0)) - Vec4(0, 0, 1, 0)).norm(), 1e-12);
  EXPECT_LT((polar_to_cartesian(Vec4(std::sqrt(2.0), kPi / 2, kPi / 4, 0.0)) - Vec4(1, 1, 0, 0)).norm(), 1e-12);
}

TEST(PolarToCartesian, PreservesRange) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec4 x = random_polar(rng);
    EXPECT_NEAR(polar_to_cartesian(x).head<3>().norm(), x[0], 1e-12 * std::max(1.0, x[0]));
  }
}

TEST(PolarToCartesian, RoundTripThroughCartesianToPolar) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    Vec4 x = random_polar(rng);
    x[1] = rng.uniform(0.05, kPi - 0.05);  // psi is undefined on the poles
    const Vec4 c = polar_to_cartesian(x);
    const Vec4 back = cartesian_to_polar(c.head<3>(), c[3]);
    EXPECT_NEAR(back[0], x[0], 1e-9);
    EXPECT_NEAR(back[1], x[1], 1e-9);
    EXPECT_NEAR(wrap_angle(back[2] - x[2]), 0.0, 1e-9);
    EXPECT_NEAR(wrap_angle(back[3] - x[3]), 0.0, 1e-12);
  }
}

TEST(PolarJacobian, MatchesFiniteDifferences) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Vec4 x = random_polar(rng);
    const Mat4 diff = polar_jacobian(x) - numeric_jacobian(x);
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-6) << "at " << x.transpose();
  }
}

TEST(PolarCovariance, ForwardAxisExample) {
  PolarMeasurement m;
  m.mean = Vec4(2.0, kPi / 2, 0.0, 0.0);
  m.variance = Vec4(0.01, 0.0025, 0.0025, 0.01);
  const Mat4 expected = Vec4::Constant(0.01).asDiagonal();
  EXPECT_LT((polar_cov_to_cartesian(m) - expected).cwiseAbs().maxCoeff(), 1e-12);

  const Mat4 j = numeric_jacobian(m.mean);
  const Mat4 oracle = j * m.variance.asDiagonal() * j.transpose();
  EXPECT_LT((polar_cov_to_cartesian(m) - oracle).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PolarCovariance, ZeroVariancesGiveZeroMatrix) {
  PolarMeasurement m;
  m.mean = Vec4(3.0, 1.0, -0.4, 0.2);
  m.variance = Vec4::Zero();
  EXPECT_EQ(polar_cov_to_cartesian(m), Mat4::Zero());
}

TEST(PolarCovariance, SymmetricPositiveSemidefinite) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    PolarMeasurement m;
    m.mean = random_polar(rng);
    for (int j = 0; j < 4; ++j) {
      m.variance[j] = std::pow(10.0, rng.uniform(-8.0, 1.0));
    }
    const Mat4 c = polar_cov_to_cartesian(m);
    EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::SelfAdjointEigenSolver<Mat4> eig(c, Eigen::EigenvaluesOnly);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(PolarMeasurementValidation, RejectsInvalid) {
  PolarMeasurement ok;
  ok.mean = Vec4(2.0, 1.0, 0.5, 0.1);
  EXPECT_NO_THROW(validate(ok));
  PolarMeasurement bad = ok;
  bad.mean[0] = 0.0;
  EXPECT_THROW(validate(bad), GeometryError);
  bad = ok;
  bad.mean[1] = 3.5;
  EXPECT_THROW(validate(bad), GeometryError);
  bad = ok;
  bad.variance[2] = 0.0;
  EXPECT_THROW(validate(bad), GeometryError);
}

TEST(GateFrame, Examples) {
  EXPECT_LT((gate_frame_coords(Vec3(4.5, 0, 1), GatePose(Vec3(5, 0, 1), 0.0)) - Vec3(-0.5, 0, 0)).norm(), 1e-12);
  EXPECT_LT((gate_frame_coords(Vec3(5, 1, 1), GatePose(Vec3(5, 0, 1), kPi / 2)) - Vec3(1, 0, 0)).norm(), 1e-12);
  EXPECT_LT(gate_frame_coords(Vec3(5, 0, 1), GatePose(Vec3(5, 0, 1), 1.2)).norm(), 1e-12);
}

TEST(GateFrame, NormalPointsAlongTraversal) {
  const GatePose g(Vec3(1, 2, 3), 0.7);
  EXPECT_GT(gate_frame_coords(g.t + 0.1 * g.normal(), g).x(), 0.0);
  EXPECT_LT(gate_frame_coords(g.t - 0.1 * g.normal(), g).x(), 0.0);
}

TEST(MeasurementToOdometry, Examples) {
  const GatePose a = measurement_to_odometry(Vec4(2, 0, 0, 0.4), BodyPose::from_yaw(Vec3::Zero(), 0.0));
  EXPECT_LT((a.t - Vec3(2, 0, 0)).norm(), 1e-12);
  EXPECT_NEAR(a.yaw, 0.4, 1e-15);

  const GatePose b = measurement_to_odometry(Vec4(2, 0, 0, 0.0), BodyPose::from_yaw(Vec3(1, 0, 0), kPi / 2));
  EXPECT_LT((b.t - Vec3(1, 2, 0)).norm(), 1e-12);
  EXPECT_NEAR(b.yaw, kPi / 2, 1e-15);
}

TEST(MeasurementToOdometry, InverseOfGateInBody) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const GatePose g(Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(0, 5)), rng.uniform(-kPi, kPi));
    const BodyPose body =
        BodyPose::from_yaw(Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(0, 5)), rng.uniform(-kPi, kPi));
    const GatePose back = measurement_to_odometry(gate_in_body(g, body), body);
    EXPECT_LT((back.t - g.t).norm(), 1e-12 * 50);
    EXPECT_NEAR(wrap_angle(back.yaw - g.yaw), 0.0, 1e-12);
  }
}

TEST(GatePose, YawIsWrapped) {
  EXPECT_NEAR(GatePose(Vec3::Zero(), 3.0 * kPi / 2).yaw, -kPi / 2, 1e-15);
  EXPECT_EQ(GatePose(Vec3::Zero(), -kPi).yaw, kPi);
}
