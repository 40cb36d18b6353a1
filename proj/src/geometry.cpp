#include "gaterace/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gaterace {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double wrap_angle(double a) {
  if (!std::isfinite(a)) {
    throw GeometryError("wrap_angle: non-finite angle");
  }
  if (a > -kPi && a <= kPi) {
    return a;
  }
  double r = std::fmod(a + kPi, kTwoPi);
  if (r < 0.0) {
    r += kTwoPi;
  }
  r -= kPi;
  // fmod lands on -pi for odd multiples of pi; the canonical representative is +pi.
  if (r <= -kPi) {
    r = kPi;
  }
  return r;
}

Rot3 yaw_rotation(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Rot3 r;
  r << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return r;
}

double yaw_of(const Rot3& r) { return std::atan2(r(1, 0), r(0, 0)); }

void validate(const PolarMeasurement& m) {
  if (!m.mean.allFinite() || !m.variance.allFinite()) {
    throw GeometryError("polar measurement: non-finite component");
  }
  if (!(m.r() > 0.0)) {
    throw GeometryError("polar measurement: range must be positive");
  }
  if (m.theta() < 0.0 || m.theta() > kPi) {
    throw GeometryError("polar measurement: theta outside [0, pi]");
  }
  for (int i = 0; i < 4; ++i) {
    if (!(m.variance[i] > 0.0)) {
      throw GeometryError("polar measurement: variance " + std::to_string(i) + " must be positive");
    }
  }
}

Vec4 polar_to_cartesian(const Vec4& polar) {
  const double r = polar[0];
  const double st = std::sin(polar[1]);
  const double ct = std::cos(polar[1]);
  const double sp = std::sin(polar[2]);
  const double cp = std::cos(polar[2]);
  return {r * st * cp, r * st * sp, r * ct, polar[3]};
}

Mat4 polar_jacobian(const Vec4& polar) {
  const double r = polar[0];
  const double st = std::sin(polar[1]);
  const double ct = std::cos(polar[1]);
  const double sp = std::sin(polar[2]);
  const double cp = std::cos(polar[2]);
  Mat4 j;
  //    d/dr      d/dtheta       d/dpsi         d/dphi
  j << st * cp,   r * ct * cp,   -r * st * sp,  0.0,
       st * sp,   r * ct * sp,   r * st * cp,   0.0,
       ct,        -r * st,       0.0,           0.0,
       0.0,       0.0,           0.0,           1.0;
  return j;
}

Mat4 polar_cov_to_cartesian(const PolarMeasurement& m) {
  const Mat4 j = polar_jacobian(m.mean);
  Mat4 cov = j * m.variance.asDiagonal() * j.transpose();
  // Symmetrize so downstream checks see an exactly symmetric matrix.
  return 0.5 * (cov + cov.transpose());
}

CartesianMeasurement to_cartesian(const PolarMeasurement& m) {
  return {polar_to_cartesian(m.mean), polar_cov_to_cartesian(m)};
}

Vec4 cartesian_to_polar(const Vec3& t_body, double yaw_rel) {
  const double r = t_body.norm();
  const double theta = r > 0.0 ? std::acos(std::clamp(t_body.z() / r, -1.0, 1.0)) : 0.0;
  const double psi = std::atan2(t_body.y(), t_body.x());
  return {r, theta, psi, wrap_angle(yaw_rel)};
}

Vec3 gate_frame_coords(const Vec3& point, const GatePose& gate) {
  return gate.rotation().transpose() * (point - gate.t);
}

GatePose measurement_to_odometry(const Vec4& z_body, const BodyPose& body) {
  const Vec3 t = body.R * z_body.head<3>() + body.t;
  return GatePose{t, wrap_angle(z_body[3] + body.yaw)};
}

Vec4 gate_in_body(const GatePose& gate, const BodyPose& body) {
  Vec4 z;
  z.head<3>() = body.R.transpose() * (gate.t - body.t);
  z[3] = wrap_angle(gate.yaw - body.yaw);
  return z;
}

}  // namespace gaterace
