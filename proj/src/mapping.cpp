#include "gaterace/mapping.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gaterace {

TrackMap TrackMap::from_prior(std::span<const GatePose> gates, std::span<const Aperture> apertures,
                              const Mat4& prior_covariance, const Mat4& process_noise) {
  if (gates.empty()) {
    throw std::invalid_argument("TrackMap: track has no gates");
  }
  if (apertures.size() != gates.size()) {
    throw std::invalid_argument("TrackMap: one aperture per gate required");
  }
  TrackMap map;
  map.beliefs.reserve(gates.size());
  for (const GatePose& g : gates) {
    map.beliefs.push_back(GateBelief::from_pose(g, prior_covariance));
  }
  map.apertures.assign(apertures.begin(), apertures.end());
  map.prior_covariance = prior_covariance;
  map.process_noise = process_noise;
  return map;
}

GateBelief ekf_predict(const GateBelief& b, const Mat4& process_noise) {
  GateBelief out = b;
  out.P += process_noise;
  return out;
}

Mat4 measurement_matrix(const BodyPose& body) {
  Mat4 h = Mat4::Zero();
  h.topLeftCorner<3, 3>() = body.R.transpose();
  h(3, 3) = 1.0;
  return h;
}

Vec4 measurement_offset(const BodyPose& body) {
  Vec4 mu;
  mu.head<3>() = -body.R.transpose() * body.t;
  mu[3] = -body.yaw;
  return mu;
}

UpdateOutcome ekf_update(const GateBelief& b, const CartesianMeasurement& z, const BodyPose& body) {
  UpdateOutcome out{b, false, Vec4::Zero()};

  const Mat4 h = measurement_matrix(body);
  const Vec4 mu = measurement_offset(body);

  Vec4 innovation = z.mean - mu - h * b.x;
  innovation[3] = wrap_angle(innovation[3]);
  out.innovation = innovation;

  Mat4 s = z.covariance + h * b.P * h.transpose();
  s = 0.5 * (s + s.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat4> eig(s, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxInnovationCondition) {
    return out;
  }

  // K = P H^T S^-1, computed as (S^-1 H P)^T with P and S symmetric.
  const Mat4 gain = s.ldlt().solve(h * b.P).transpose();
  const Mat4 i_kh = Mat4::Identity() - gain * h;

  out.belief.x = b.x + gain * innovation;
  out.belief.x[3] = wrap_angle(out.belief.x[3]);
  Mat4 p = i_kh * b.P * i_kh.transpose() + gain * z.covariance * gain.transpose();
  out.belief.P = 0.5 * (p + p.transpose());
  out.applied = true;
  return out;
}

Assignment assign_measurement(const TrackMap& map, const CartesianMeasurement& z, const BodyPose& body) {
  if (map.beliefs.empty()) {
    throw std::invalid_argument("assign_measurement: empty map");
  }
  const GatePose measured = measurement_to_odometry(z.mean, body);
  Assignment a;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < map.beliefs.size(); ++i) {
    const double d = (map.beliefs[i].x.head<3>() - measured.t).norm();
    if (d < best) {
      best = d;
      a.nearest = i;
    }
  }
  a.accepted = a.nearest == map.next_gate;
  return a;
}

Traversal check_traversal(const Vec3& prev, const Vec3& curr, const GatePose& gate, const Aperture& aperture) {
  const Vec3 p = gate_frame_coords(prev, gate);
  const Vec3 c = gate_frame_coords(curr, gate);
  if (!(p.x() < 0.0 && c.x() >= 0.0)) {
    return Traversal::none;
  }
  const double s = -p.x() / (c.x() - p.x());
  const Vec3 hit = p + s * (c - p);
  if (std::abs(hit.y()) <= aperture.half_width && std::abs(hit.z()) <= aperture.half_height) {
    return Traversal::passed;
  }
  return Traversal::missed;
}

MapStepResult map_step(TrackMap map, const std::optional<PolarMeasurement>& measurement,
                       const BodyPose& body, const Vec3& prev_position, const Vec3& curr_position) {
  MapStepResult result;
  for (GateBelief& b : map.beliefs) {
    b = ekf_predict(b, map.process_noise);
  }

  if (measurement) {
    const CartesianMeasurement z = to_cartesian(*measurement);
    const Assignment a = assign_measurement(map, z, body);
    result.assignment = a;
    if (a.accepted) {
      UpdateOutcome u = ekf_update(map.beliefs[a.nearest], z, body);
      if (u.applied) {
        map.beliefs[a.nearest] = u.belief;
      } else {
        result.update_rejected = true;
      }
    }
  }

  const std::size_t next = map.next_gate;
  result.traversal = check_traversal(prev_position, curr_position, map.beliefs[next].pose(), map.apertures[next]);
  if (result.traversal == Traversal::passed) {
    map.next_gate = (next + 1) % map.beliefs.size();
    if (map.next_gate == 0) {
      ++map.laps;
      result.lap_completed = true;
    }
  }
  result.map = std::move(map);
  return result;
}

}  // namespace gaterace
