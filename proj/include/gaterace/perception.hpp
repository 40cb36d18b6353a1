#pragma once

#include "gaterace/geometry.hpp"
#include "gaterace/rng.hpp"

#include <cstddef>
#include <optional>
#include <span>

namespace gaterace {

/// Frustum and range band used as the visibility proxy.
struct CameraModel {
  double horizontal_half_fov = 0.75;  // rad
  double vertical_half_fov = 0.6;     // rad
  double max_range = 16.0;            // m
  double min_range = 0.6;             // m

  void validate() const;
};

/// Generative noise of the synthetic gate detector.
///
/// sigma_r grows linearly with range; sigma_phi grows as the gate turns
/// edge-on: base * (1 + angle_growth * (1 / max(cos(alpha), 0.1) - 1)),
/// alpha being the viewing angle off the gate normal. The reported
/// variance is the generative variance times miscalibration_factor.
struct NoiseModel {
  Vec4 base_sigma{0.08, 0.02, 0.02, 0.05};
  double range_growth = 0.05;  // 1/m
  double angle_growth = 1.0;
  double miscalibration_factor = 1.0;

  void validate() const;

  /// Generative standard deviations at a true relative pose.
  Vec4 sigma_at(const Vec4& true_polar) const;
};

/// Index of the nearest gate whose center is inside the frustum and range
/// band and whose front face points toward the camera.
std::optional<std::size_t> select_visible_gate(const BodyPose& camera_pose,
                                               std::span<const GatePose> track,
                                               const CameraModel& camera);

/// Noisy measurement around a true relative pose.
PolarMeasurement synthesize_measurement(const Vec4& true_polar, const NoiseModel& noise, Rng& rng);

/// Gaussian negative log-likelihood (without the constant) of the truth
/// under a measurement's mean and reported variance. Angle residuals are
/// wrapped. Throws GeometryError on a non-positive variance.
double measurement_nll(const Vec4& truth, const PolarMeasurement& m);

/// Source of gate measurements for the closed loop.
class MeasurementSource {
 public:
  virtual ~MeasurementSource() = default;

  /// Returns nothing when no gate is visible. Deterministic in the rng state.
  virtual std::optional<PolarMeasurement> sample(const BodyPose& true_body_pose,
                                                 std::span<const GatePose> track, double time,
                                                 Rng& rng) = 0;
};

/// Measures the closest visible true gate with NoiseModel statistics.
class SyntheticGateDetector final : public MeasurementSource {
 public:
  SyntheticGateDetector(CameraModel camera, NoiseModel noise);

  std::optional<PolarMeasurement> sample(const BodyPose& true_body_pose,
                                         std::span<const GatePose> track, double time,
                                         Rng& rng) override;

  /// Gate chosen by the most recent sample(), if any.
  std::optional<std::size_t> last_gate() const { return last_gate_; }

 private:
  CameraModel camera_;
  NoiseModel noise_;
  std::optional<std::size_t> last_gate_;
};

}  // namespace gaterace
