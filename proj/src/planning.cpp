#include "gaterace/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gaterace {

namespace {
constexpr double kDuplicateTolerance = 1e-9;
}  // namespace

std::vector<Waypoint> generate_waypoints(const TrackMap& map, double x_g, const Vec3& quad_position) {
  if (!(x_g > 0.0) || !std::isfinite(x_g)) {
    throw PlanningError("generate_waypoints: x_G must be positive");
  }
  const std::size_t n = map.beliefs.size();
  std::vector<Waypoint> out;
  out.reserve(2 * n);
  Vec3 approach_from = quad_position;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t idx = (map.next_gate + k) % n;
    const GatePose gate = map.beliefs[idx].pose();
    const Vec3 offset = gate.rotation() * Vec3(x_g, 0.0, 0.0);
    const Vec3 minus = gate.t - offset;
    const Vec3 plus = gate.t + offset;
    const bool reversed = gate_frame_coords(approach_from, gate).x() > 0.0;
    out.push_back({reversed ? plus : minus, idx, WaypointSide::front});
    out.push_back({reversed ? minus : plus, idx, WaypointSide::back});
    approach_from = gate.t;
  }
  return out;
}

ReferencePath::ReferencePath(std::span<const Vec3> points) {
  for (const Vec3& p : points) {
    if (!p.allFinite()) {
      throw PlanningError("reference path: non-finite point");
    }
    if (!points_.empty() && (p - points_.back()).norm() <= kDuplicateTolerance) {
      continue;
    }
    points_.push_back(p);
  }
  if (points_.size() < 2) {
    throw PlanningError("reference path: need at least two distinct points");
  }
  arc_.reserve(points_.size());
  arc_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    arc_.push_back(arc_.back() + (points_[i] - points_[i - 1]).norm());
  }
}

std::size_t ReferencePath::segment_index(double s) const {
  // Segment i spans [arc_[i], arc_[i+1]); the final segment also owns the end.
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  const std::size_t after = static_cast<std::size_t>(it - arc_.begin());
  if (after == 0) {
    return 0;
  }
  return std::min(after - 1, points_.size() - 2);
}

Vec3 ReferencePath::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const std::size_t i = segment_index(s);
  const double seg = arc_[i + 1] - arc_[i];
  const double u = (s - arc_[i]) / seg;
  return points_[i] + u * (points_[i + 1] - points_[i]);
}

Vec3 ReferencePath::direction_at(double s) const {
  const std::size_t i = segment_index(std::clamp(s, 0.0, length()));
  return (points_[i + 1] - points_[i]).normalized();
}

double ReferencePath::heading_at(double s) const {
  const std::size_t i = segment_index(std::clamp(s, 0.0, length()));
  const auto horizontal = [&](std::size_t k) {
    const Vec3 d = points_[k + 1] - points_[k];
    return std::hypot(d.x(), d.y()) > 1e-9;
  };
  const std::size_t segments = points_.size() - 1;
  for (std::size_t off = 0; off < segments; ++off) {
    for (const std::size_t k : {i + off, i - std::min(i, off)}) {
      if (k < segments && horizontal(k)) {
        const Vec3 d = points_[k + 1] - points_[k];
        return std::atan2(d.y(), d.x());
      }
    }
  }
  return 0.0;
}

double ReferencePath::project(const Vec3& p, double s_min, double window) const {
  s_min = std::clamp(s_min, 0.0, length());
  const double s_max = std::min(length(), s_min + std::max(window, 0.0));
  double best_s = s_min;
  double best_d = (point_at(s_min) - p).squaredNorm();
  for (std::size_t i = segment_index(s_min); i + 1 < points_.size() && arc_[i] <= s_max; ++i) {
    const Vec3 a = points_[i];
    const Vec3 d = points_[i + 1] - a;
    const double len = arc_[i + 1] - arc_[i];
    double u = (p - a).dot(d) / (len * len);
    double s = std::clamp(arc_[i] + u * len, s_min, s_max);
    s = std::clamp(s, arc_[i], arc_[i + 1]);
    const double dist = (point_at(s) - p).squaredNorm();
    if (dist < best_d) {
      best_d = dist;
      best_s = s;
    }
  }
  return best_s;
}

ReferencePath build_reference_path(std::span<const Waypoint> waypoints) {
  std::vector<Vec3> pts;
  pts.reserve(waypoints.size());
  for (const Waypoint& w : waypoints) {
    pts.push_back(w.p);
  }
  return ReferencePath(pts);
}

ReferencePath plan_race_path(const TrackMap& map, double x_g, const Vec3& anchor, const Vec3& quad_position) {
  const std::vector<Waypoint> wps = generate_waypoints(map, x_g, quad_position);
  std::vector<Vec3> pts;
  pts.reserve(wps.size() + 1);
  pts.push_back(anchor);
  for (const Waypoint& w : wps) {
    pts.push_back(w.p);
  }
  return ReferencePath(pts);
}

Carrot sample_carrot(const ReferencePath& path, double progress, double lookahead) {
  if (!(lookahead > 0.0)) {
    throw PlanningError("sample_carrot: lookahead must be positive");
  }
  const double s = std::min(progress + lookahead, path.length());
  return {path.point_at(s), path.heading_at(s)};
}

double default_lookahead(double speed) { return std::max(0.5, 0.6 * speed); }

std::optional<Carrot> baseline_los_reference(const std::optional<PolarMeasurement>& measurement,
                                             const BodyPose& body) {
  if (!measurement) {
    return std::nullopt;
  }
  const GatePose gate = measurement_to_odometry(polar_to_cartesian(measurement->mean), body);
  const Vec3 d = gate.t - body.t;
  return Carrot{gate.t, std::atan2(d.y(), d.x())};
}

double ProgressTracker::update(const ReferencePath& path, const Vec3& p) {
  s_ = std::max(s_, path.project(p, s_, window_));
  return s_;
}

}  // namespace gaterace
