#pragma once

#include "gaterace/control.hpp"
#include "gaterace/geometry.hpp"
#include "gaterace/mapping.hpp"
#include "gaterace/perception.hpp"
#include "gaterace/planning.hpp"
#include "gaterace/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gaterace {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scheduled replacement of a true gate pose.
struct GateMove {
  double time = 0.0;
  std::size_t gate = 0;
  GatePose pose;
};

struct SimConfig {
  double control_rate_hz = 100.0;
  double perception_rate_hz = 10.0;
  double drift_sigma_translation = 0.02;  // m / sqrt(s)
  double drift_sigma_yaw = 0.004;         // rad / sqrt(s)
  double perturbation_radius = 0.0;       // m
  std::vector<GateMove> gate_moves;
  double timeout = 120.0;                 // s
  int required_laps = 3;
  double frame_band = 0.3;                // m
  double start_distance = 4.0;            // m before the first gate
  bool perception_enabled = true;

  void validate() const;
  /// Control ticks per perception tick.
  int perception_divider() const;
};

struct PlannerConfig {
  double x_g = 0.8;
  double lookahead_min = 0.5;   // m
  double lookahead_time = 0.6;  // s
  double baseline_overshoot = 3.0;  // m past the measured gate center

  double lookahead(double speed) const;
  void validate() const;
};

struct MappingConfig {
  Mat4 process_noise = Vec4(0.03 * 0.03, 0.03 * 0.03, 0.03 * 0.03, 0.02 * 0.02).asDiagonal();
  Mat4 prior_covariance = Vec4(1.0, 1.0, 1.0, 0.3 * 0.3).asDiagonal();

  void validate() const;
};

struct GateSpec {
  GatePose pose;
  Aperture aperture;
};

/// Everything needed to fly a track.
struct TrackConfig {
  std::string name = "track";
  std::vector<GateSpec> gates;
  CameraModel camera;
  NoiseModel noise;
  SimConfig sim;
  MpcConfig controller;
  PlannerConfig planner;
  MappingConfig mapping;

  /// Throws ConfigError naming the violated field.
  void validate() const;
  std::vector<GatePose> gate_poses() const;
  std::vector<Aperture> apertures() const;
};

/// Pose of the odometry frame in the world: the accumulated VIO drift.
struct Drift {
  Vec3 t = Vec3::Zero();
  double yaw = 0.0;

  bool operator==(const Drift&) const = default;
};

/// Random-walk increment of the drift.
Drift drift_step(const Drift& drift, double dt, double sigma_translation, double sigma_yaw, Rng& rng);

/// World-frame quantities expressed in the drifting odometry frame.
BodyPose body_in_odometry(const BodyPose& world_pose, const Drift& drift);
GatePose gate_in_odometry(const GatePose& world_gate, const Drift& drift);
Vec3 vector_in_odometry(const Vec3& world_vector, const Drift& drift);
Vec3 vector_in_world(const Vec3& odometry_vector, const Drift& drift);

/// Each gate shifted uniformly within a horizontal disk of radius rho and
/// yawed uniformly within +-0.15 rad per meter of rho. Always consumes three
/// draws per gate so perturbations for different rho stay paired.
std::vector<GatePose> perturb_track(std::span<const GatePose> nominal, double rho, Rng& rng);

enum class Crossing { none, passed, missed, crashed };

/// Scores a step against a true gate: forward crossing inside the aperture
/// passes, inside the frame band crashes, further out misses. Ground
/// contact (z <= 0) crashes regardless of gates.
Crossing classify_crossing_truth(const Vec3& prev, const Vec3& curr, const GatePose& gate, const Aperture& aperture,
                                 double frame_band);

/// True if the step crosses the gate plane in either direction through the
/// frame band around the aperture.
bool hits_gate_frame(const Vec3& prev, const Vec3& curr, const GatePose& gate, const Aperture& aperture,
                     double frame_band);

struct WorldState {
  QuadState quad;
  Drift drift;
  std::vector<GatePose> gates;
  double time = 0.0;
  std::size_t next_gate = 0;
  int gates_passed = 0;
  int laps = 0;
};

/// Replaces a true gate pose; beliefs are untouched. Throws ConfigError on a
/// bad index.
WorldState move_gate(WorldState world, const GateMove& move);

enum class PlannerMode { full, baseline };
enum class Outcome { completed, crashed, missed, timeout };

std::string_view to_string(PlannerMode mode);
std::string_view to_string(Outcome outcome);
PlannerMode parse_planner_mode(std::string_view text);
Outcome parse_outcome(std::string_view text);

/// Per-tick event flags in the trajectory log.
enum TickEvent : std::uint32_t {
  kEventPerceptionTick = 1u << 0,
  kEventMeasurement = 1u << 1,
  kEventRejectedOutlier = 1u << 2,
  kEventRejectedUpdate = 1u << 3,
  kEventBeliefPassed = 1u << 4,
  kEventBeliefMissed = 1u << 5,
  kEventGatePassed = 1u << 6,
  kEventLap = 1u << 7,
  kEventCrash = 1u << 8,
  kEventMiss = 1u << 9,
  kEventGateMoved = 1u << 10,
};

std::vector<std::string> event_names(std::uint32_t events);

struct TickRecord {
  double time = 0.0;
  QuadState truth;
  QuadState vio;
  std::vector<Vec4> beliefs;
  ControlInput command;  // odometry frame
  std::uint32_t events = 0;
};

struct RunResult {
  Outcome outcome = Outcome::timeout;
  int gates_passed = 0;
  int laps_completed = 0;
  double success_fraction = 0.0;
  double elapsed = 0.0;
  std::vector<TickRecord> log;

  // Analysis state at episode end.
  int measurements = 0;
  int perception_ticks = 0;
  int control_ticks = 0;
  int outliers_rejected = 0;
  Drift final_drift;
  std::vector<GatePose> true_gates;
  std::vector<GateBelief> final_beliefs;  // empty in baseline mode
};

struct EpisodeOptions {
  bool record_log = false;
  /// Overrides the built-in synthetic detector when set.
  MeasurementSource* source = nullptr;
};

/// success_fraction = gates_passed / (required_laps * gates_per_lap), capped at 1.
double success_fraction(int gates_passed, int required_laps, std::size_t gates_per_lap);

/// Fixed-step closed loop at the control rate. Deterministic in the seed.
RunResult run_episode(const TrackConfig& track, PlannerMode mode, double speed, std::uint64_t seed,
                      const EpisodeOptions& options = {});

/// Random streams used by an episode, derived from its seed.
enum class Stream : std::uint64_t { perturbation = 1, drift = 2, perception = 3 };
Rng episode_stream(std::uint64_t seed, Stream s);

}  // namespace gaterace
