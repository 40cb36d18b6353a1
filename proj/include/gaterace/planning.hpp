#pragma once

#include "gaterace/geometry.hpp"
#include "gaterace/mapping.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace gaterace {

class PlanningError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class WaypointSide { front, back };

struct Waypoint {
  Vec3 p = Vec3::Zero();
  std::size_t gate = 0;
  WaypointSide side = WaypointSide::front;
};

/// Two waypoints per gate, offset by +-x_G along the gate normal, for one
/// full lap starting at the map's next gate. The front waypoint of the next
/// gate is on the vehicle's side of its plane; for later gates the previous
/// gate's estimated center decides. Throws PlanningError if x_G <= 0.
std::vector<Waypoint> generate_waypoints(const TrackMap& map, double x_g, const Vec3& quad_position);

/// Piecewise-linear path with a cumulative arc-length table.
class ReferencePath {
 public:
  /// Consecutive duplicates are merged. Throws PlanningError with fewer than
  /// two distinct points.
  explicit ReferencePath(std::span<const Vec3> points);

  double length() const { return arc_.back(); }
  std::span<const Vec3> points() const { return points_; }
  std::span<const double> arc_lengths() const { return arc_; }

  /// Point at arc length s, clamped to [0, length].
  Vec3 point_at(double s) const;
  /// Unit direction of the segment containing s (the later one at joints).
  Vec3 direction_at(double s) const;
  /// Heading (yaw) of the segment containing s. Vertical segments inherit
  /// the heading of the nearest non-vertical one.
  double heading_at(double s) const;

  /// Arc length of the closest point on the path restricted to
  /// [s_min, s_min + window].
  double project(const Vec3& p, double s_min, double window) const;

 private:
  std::size_t segment_index(double s) const;

  std::vector<Vec3> points_;
  std::vector<double> arc_;
};

/// Builds a path through the given waypoints.
ReferencePath build_reference_path(std::span<const Waypoint> waypoints);

/// Path used by the full pipeline: anchor point followed by the waypoints.
ReferencePath plan_race_path(const TrackMap& map, double x_g, const Vec3& anchor, const Vec3& quad_position);

struct Carrot {
  Vec3 point = Vec3::Zero();
  double yaw = 0.0;
};

/// Path point at min(s + lookahead, length) with the heading of its
/// segment. Throws PlanningError if lookahead <= 0.
Carrot sample_carrot(const ReferencePath& path, double progress, double lookahead);

/// Default lookahead rule: max(0.5 m, 0.6 s * speed).
double default_lookahead(double speed);

/// Line-of-sight reference from the latest measurement alone: the measured
/// gate center in the odometry frame, yaw pointing at it. No map and no
/// gate orientation are used.
std::optional<Carrot> baseline_los_reference(const std::optional<PolarMeasurement>& measurement,
                                             const BodyPose& body);

/// Monotone arc-length progress along a path.
class ProgressTracker {
 public:
  explicit ProgressTracker(double window = 3.0) : window_(window) {}

  /// Projects p onto the path ahead of the current progress; never moves back.
  double update(const ReferencePath& path, const Vec3& p);
  void reset() { s_ = 0.0; }
  double value() const { return s_; }

 private:
  double window_;
  double s_ = 0.0;
};

}  // namespace gaterace
