#pragma once

#include "gaterace/geometry.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace gaterace {

/// EKF state of one gate in the odometry frame: [t_OG, phi_OG] and its
/// 4x4 covariance.
struct GateBelief {
  Vec4 x = Vec4::Zero();
  Mat4 P = Mat4::Identity();

  GatePose pose() const { return GatePose{x.head<3>(), x[3]}; }
  static GateBelief from_pose(const GatePose& g, const Mat4& P) {
    GateBelief b;
    b.x << g.t, g.yaw;
    b.P = P;
    return b;
  }
};

/// Half extents of a gate opening in the gate y (width) and z (height) axes.
struct Aperture {
  double half_width = 0.75;
  double half_height = 0.75;
};

/// Independent per-gate filters plus the index of the next gate to pass.
struct TrackMap {
  std::vector<GateBelief> beliefs;
  std::vector<Aperture> apertures;
  std::size_t next_gate = 0;
  int laps = 0;
  Mat4 process_noise = Mat4::Zero();
  Mat4 prior_covariance = Mat4::Identity();

  /// Builds a map whose beliefs start at the demonstrated gate poses with
  /// the prior covariance. Throws std::invalid_argument on an empty track
  /// or mismatched aperture count.
  static TrackMap from_prior(std::span<const GatePose> gates, std::span<const Aperture> apertures,
                             const Mat4& prior_covariance, const Mat4& process_noise);

  std::size_t size() const { return beliefs.size(); }
};

/// A-priori step with identity dynamics.
GateBelief ekf_predict(const GateBelief& b, const Mat4& process_noise);

struct UpdateOutcome {
  GateBelief belief;
  bool applied = false;     // false when the innovation covariance was ill-conditioned
  Vec4 innovation = Vec4::Zero();
};

/// Innovation covariance above this condition number rejects the update.
inline constexpr double kMaxInnovationCondition = 1e12;

/// Joseph-form a-posteriori step for a body-frame Cartesian measurement
/// taken at the given odometry-frame body pose.
UpdateOutcome ekf_update(const GateBelief& b, const CartesianMeasurement& z, const BodyPose& body);

/// Measurement model pieces: H = blockdiag(R_OB^T, 1), mu = [-R_OB^T t_OB, -phi_OB].
Mat4 measurement_matrix(const BodyPose& body);
Vec4 measurement_offset(const BodyPose& body);

struct Assignment {
  std::size_t nearest = 0;  // lowest index among equidistant gates
  bool accepted = false;    // nearest == next gate
};

/// Nearest-gate assignment in the odometry frame; anything not matching
/// the next gate is an outlier.
Assignment assign_measurement(const TrackMap& map, const CartesianMeasurement& z, const BodyPose& body);

enum class Traversal { none, passed, missed };

/// Forward plane crossing (gate-frame x from < 0 to >= 0) classified by the
/// interpolated intersection point against the aperture.
Traversal check_traversal(const Vec3& prev, const Vec3& curr, const GatePose& gate, const Aperture& aperture);

struct MapStepResult {
  TrackMap map;
  Traversal traversal = Traversal::none;
  std::optional<Assignment> assignment;  // set when a measurement was present
  bool update_rejected = false;          // ill-conditioned innovation
  bool lap_completed = false;
};

/// One mapping tick: predict all gates, fuse an optional measurement into
/// the next gate, then advance the next gate on a belief-frame traversal.
MapStepResult map_step(TrackMap map, const std::optional<PolarMeasurement>& measurement,
                       const BodyPose& body, const Vec3& prev_position, const Vec3& curr_position);

}  // namespace gaterace
