#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace gaterace {

using Vec3 = Eigen::Vector3d;
using Rot3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wraps an angle into (-pi, pi]. Throws GeometryError on non-finite input.
double wrap_angle(double a);

/// Rotation about the world z axis.
Rot3 yaw_rotation(double yaw);

/// Yaw of a rotation matrix, assuming it is (close to) a pure z rotation.
double yaw_of(const Rot3& r);

/// Upright gate: center position and yaw about world z. Traversal direction
/// is the gate frame +x axis.
struct GatePose {
  Vec3 t = Vec3::Zero();
  double yaw = 0.0;

  GatePose() = default;
  GatePose(Vec3 position, double yaw_rad) : t(std::move(position)), yaw(wrap_angle(yaw_rad)) {}

  Rot3 rotation() const { return yaw_rotation(yaw); }
  Vec3 normal() const { return rotation().col(0); }
};

/// Rigid body pose with the yaw cached alongside the rotation.
struct BodyPose {
  Rot3 R = Rot3::Identity();
  Vec3 t = Vec3::Zero();
  double yaw = 0.0;

  static BodyPose from_yaw(const Vec3& position, double yaw_rad) {
    return BodyPose{yaw_rotation(yaw_rad), position, wrap_angle(yaw_rad)};
  }
};

/// Gate pose relative to the body in spherical coordinates: range r,
/// polar angle theta from body +z, azimuth psi from body +x, and relative
/// yaw phi. Each component carries its own variance.
struct PolarMeasurement {
  Vec4 mean = Vec4::Zero();      // [r, theta, psi, phi]
  Vec4 variance = Vec4::Ones();  // per-component, same units squared

  double r() const { return mean[0]; }
  double theta() const { return mean[1]; }
  double psi() const { return mean[2]; }
  double phi() const { return mean[3]; }
};

/// Gate pose relative to the body in Cartesian form: [t_BG, phi_BG].
struct CartesianMeasurement {
  Vec4 mean = Vec4::Zero();
  Mat4 covariance = Mat4::Zero();

  Vec3 translation() const { return mean.head<3>(); }
  double yaw() const { return mean[3]; }
};

/// Throws GeometryError when r <= 0, theta outside [0, pi], a non-finite
/// component or a non-positive variance.
void validate(const PolarMeasurement& m);

/// Spherical-to-Cartesian conversion of the mean, phi passed through.
Vec4 polar_to_cartesian(const Vec4& polar);

/// Analytic Jacobian of polar_to_cartesian with respect to [r, theta, psi, phi].
Mat4 polar_jacobian(const Vec4& polar);

/// First-order propagation J diag(variance) J^T. Variances are not
/// validated here so the zero-variance limit stays usable.
Mat4 polar_cov_to_cartesian(const PolarMeasurement& m);

/// Mean and covariance together.
CartesianMeasurement to_cartesian(const PolarMeasurement& m);

/// Inverse of polar_to_cartesian for a body-frame translation and relative yaw.
Vec4 cartesian_to_polar(const Vec3& t_body, double yaw_rel);

/// Position of a point expressed in the gate frame: R_OG^T (p - t_OG).
Vec3 gate_frame_coords(const Vec3& point, const GatePose& gate);

/// Body-frame gate measurement mapped into the odometry frame.
GatePose measurement_to_odometry(const Vec4& z_body, const BodyPose& body);

/// Gate pose expressed in the body frame, [t_BG, phi_BG]. Inverse of
/// measurement_to_odometry.
Vec4 gate_in_body(const GatePose& gate, const BodyPose& body);

}  // namespace gaterace
