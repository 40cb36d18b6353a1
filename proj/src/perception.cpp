#include "gaterace/perception.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gaterace {

namespace {

constexpr double kMinRange = 1e-3;

void require(bool ok, const char* what) {
  if (!ok) {
    throw GeometryError(what);
  }
}

}  // namespace

void CameraModel::validate() const {
  constexpr double half_pi = std::numbers::pi / 2.0;
  require(horizontal_half_fov > 0.0 && horizontal_half_fov < half_pi,
          "camera.horizontal_half_fov must lie in (0, pi/2)");
  require(vertical_half_fov > 0.0 && vertical_half_fov < half_pi,
          "camera.vertical_half_fov must lie in (0, pi/2)");
  require(min_range > 0.0, "camera.min_range must be positive");
  require(max_range > min_range, "camera.max_range must exceed camera.min_range");
}

void NoiseModel::validate() const {
  for (int i = 0; i < 4; ++i) {
    require(std::isfinite(base_sigma[i]) && base_sigma[i] > 0.0, "noise.base_sigma entries must be positive");
  }
  require(std::isfinite(range_growth) && range_growth >= 0.0, "noise.range_growth must be nonnegative");
  require(std::isfinite(angle_growth) && angle_growth >= 0.0, "noise.angle_growth must be nonnegative");
  require(std::isfinite(miscalibration_factor) && miscalibration_factor > 0.0,
          "noise.miscalibration_factor must be positive");
}

Vec4 NoiseModel::sigma_at(const Vec4& true_polar) const {
  Vec4 sigma = base_sigma;
  sigma[0] *= 1.0 + range_growth * true_polar[0];

  // Gate normal in the body frame is (cos phi, sin phi, 0); the line of
  // sight is the unit vector of the spherical direction.
  const Vec4 cart = polar_to_cartesian({1.0, true_polar[1], true_polar[2], 0.0});
  const double cos_alpha = cart[0] * std::cos(true_polar[3]) + cart[1] * std::sin(true_polar[3]);
  const double edge_on = 1.0 / std::max(cos_alpha, 0.1) - 1.0;
  sigma[3] *= 1.0 + angle_growth * edge_on;
  return sigma;
}

std::optional<std::size_t> select_visible_gate(const BodyPose& camera_pose,
                                               std::span<const GatePose> track,
                                               const CameraModel& camera) {
  std::optional<std::size_t> best;
  double best_range = 0.0;
  for (std::size_t i = 0; i < track.size(); ++i) {
    const GatePose& gate = track[i];
    const Vec3 line_of_sight = gate.t - camera_pose.t;
    const double range = line_of_sight.norm();
    if (range < camera.min_range || range > camera.max_range) {
      continue;
    }
    const Vec3 in_cam = camera_pose.R.transpose() * line_of_sight;
    if (in_cam.x() <= 0.0) {
      continue;
    }
    const double azimuth = std::atan2(in_cam.y(), in_cam.x());
    const double elevation = std::atan2(in_cam.z(), std::hypot(in_cam.x(), in_cam.y()));
    if (std::abs(azimuth) > camera.horizontal_half_fov || std::abs(elevation) > camera.vertical_half_fov) {
      continue;
    }
    // Front face visible: the camera looks along the traversal direction.
    if (gate.normal().dot(line_of_sight) <= 0.0) {
      continue;
    }
    if (!best || range < best_range) {
      best = i;
      best_range = range;
    }
  }
  return best;
}

PolarMeasurement synthesize_measurement(const Vec4& true_polar, const NoiseModel& noise, Rng& rng) {
  const Vec4 sigma = noise.sigma_at(true_polar);
  PolarMeasurement m;
  for (int i = 0; i < 4; ++i) {
    m.mean[i] = true_polar[i] + sigma[i] * rng.normal();
  }
  m.mean[0] = std::max(m.mean[0], kMinRange);
  m.mean[1] = std::clamp(m.mean[1], 0.0, std::numbers::pi);
  m.mean[2] = wrap_angle(m.mean[2]);
  m.mean[3] = wrap_angle(m.mean[3]);
  m.variance = sigma.cwiseProduct(sigma) * noise.miscalibration_factor;
  return m;
}

double measurement_nll(const Vec4& truth, const PolarMeasurement& m) {
  double nll = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double var = m.variance[j];
    if (!(var > 0.0)) {
      throw GeometryError("measurement_nll: variance " + std::to_string(j) + " must be positive");
    }
    double residual = truth[j] - m.mean[j];
    if (j >= 2) {
      residual = wrap_angle(residual);
    }
    nll += std::log(var) + residual * residual / var;
  }
  return nll;
}

SyntheticGateDetector::SyntheticGateDetector(CameraModel camera, NoiseModel noise)
    : camera_(camera), noise_(std::move(noise)) {
  camera_.validate();
  noise_.validate();
}

std::optional<PolarMeasurement> SyntheticGateDetector::sample(const BodyPose& true_body_pose,
                                                              std::span<const GatePose> track,
                                                              double /*time*/, Rng& rng) {
  last_gate_ = select_visible_gate(true_body_pose, track, camera_);
  if (!last_gate_) {
    return std::nullopt;
  }
  const Vec4 rel = gate_in_body(track[*last_gate_], true_body_pose);
  const Vec4 truth = cartesian_to_polar(rel.head<3>(), rel[3]);
  return synthesize_measurement(truth, noise_, rng);
}

}  // namespace gaterace
