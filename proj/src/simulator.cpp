#include "gaterace/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gaterace {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw ConfigError(what);
  }
}

bool is_psd(const Mat4& m) {
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    return false;
  }
  const Eigen::SelfAdjointEigenSolver<Mat4> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= 0.0;
}

// Gate-frame intersection of a plane crossing in either direction.
std::optional<Vec3> plane_hit(const Vec3& prev, const Vec3& curr, const GatePose& gate) {
  const Vec3 p = gate_frame_coords(prev, gate);
  const Vec3 c = gate_frame_coords(curr, gate);
  const bool forward = p.x() < 0.0 && c.x() >= 0.0;
  const bool backward = p.x() >= 0.0 && c.x() < 0.0;
  if (!forward && !backward) {
    return std::nullopt;
  }
  const double s = -p.x() / (c.x() - p.x());
  return p + s * (c - p);
}

bool inside(const Vec3& hit, double half_width, double half_height) {
  return std::abs(hit.y()) <= half_width && std::abs(hit.z()) <= half_height;
}

QuadState vio_state(const QuadState& truth, const Drift& drift) {
  const BodyPose pose = body_in_odometry(BodyPose::from_yaw(truth.p, truth.yaw), drift);
  return QuadState{pose.t, vector_in_odometry(truth.v, drift), pose.yaw};
}

}  // namespace

void SimConfig::validate() const {
  require(std::isfinite(control_rate_hz) && control_rate_hz > 0.0, "sim.control_rate_hz must be positive");
  require(std::isfinite(perception_rate_hz) && perception_rate_hz > 0.0, "sim.perception_rate_hz must be positive");
  const double ratio = control_rate_hz / perception_rate_hz;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && std::round(ratio) >= 1.0,
          "sim.control_rate_hz must be an integer multiple of sim.perception_rate_hz");
  require(std::isfinite(drift_sigma_translation) && drift_sigma_translation >= 0.0,
          "sim.drift_translation must be nonnegative");
  require(std::isfinite(drift_sigma_yaw) && drift_sigma_yaw >= 0.0, "sim.drift_yaw must be nonnegative");
  require(std::isfinite(perturbation_radius) && perturbation_radius >= 0.0,
          "sim.perturbation_radius must be nonnegative");
  require(std::isfinite(timeout) && timeout > 0.0, "sim.timeout must be positive");
  require(required_laps >= 1, "sim.required_laps must be at least 1");
  require(std::isfinite(frame_band) && frame_band >= 0.0, "sim.frame_band must be nonnegative");
  require(std::isfinite(start_distance) && start_distance > 0.0, "sim.start_distance must be positive");
  for (const GateMove& m : gate_moves) {
    require(std::isfinite(m.time) && m.time >= 0.0, "sim.gate_moves.time must be nonnegative");
    require(m.pose.t.allFinite() && std::isfinite(m.pose.yaw), "sim.gate_moves pose must be finite");
  }
}

int SimConfig::perception_divider() const {
  return static_cast<int>(std::lround(control_rate_hz / perception_rate_hz));
}

double PlannerConfig::lookahead(double speed) const { return std::max(lookahead_min, lookahead_time * speed); }

void PlannerConfig::validate() const {
  require(std::isfinite(x_g) && x_g > 0.0, "planner.x_g must be positive");
  require(std::isfinite(lookahead_min) && lookahead_min > 0.0, "planner.lookahead_min must be positive");
  require(std::isfinite(lookahead_time) && lookahead_time >= 0.0, "planner.lookahead_time must be nonnegative");
  require(std::isfinite(baseline_overshoot) && baseline_overshoot >= 0.0,
          "planner.baseline_overshoot must be nonnegative");
}

void MappingConfig::validate() const {
  require(is_psd(process_noise), "mapping.process_noise must be symmetric positive semidefinite");
  require(is_psd(prior_covariance), "mapping.prior_covariance must be symmetric positive semidefinite");
}

void TrackConfig::validate() const {
  require(gates.size() >= 2, "gates: a track needs at least 2 gates");
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const GateSpec& g = gates[i];
    const std::string where = "gates[" + std::to_string(i) + "]";
    require(g.pose.t.allFinite() && std::isfinite(g.pose.yaw), where + ".position must be finite");
    require(g.pose.t.z() > 0.0, where + ".position z must be above ground");
    require(std::isfinite(g.aperture.half_width) && g.aperture.half_width > 0.0,
            where + ".aperture half_width must be positive");
    require(std::isfinite(g.aperture.half_height) && g.aperture.half_height > 0.0,
            where + ".aperture half_height must be positive");
  }
  try {
    camera.validate();
    noise.validate();
  } catch (const GeometryError& e) {
    throw ConfigError(e.what());
  }
  try {
    controller.validate();
  } catch (const ControlError& e) {
    throw ConfigError(e.what());
  }
  sim.validate();
  planner.validate();
  mapping.validate();
  for (const GateMove& m : sim.gate_moves) {
    require(m.gate < gates.size(), "sim.gate_moves.gate index out of range");
  }
}

std::vector<GatePose> TrackConfig::gate_poses() const {
  std::vector<GatePose> out;
  out.reserve(gates.size());
  for (const GateSpec& g : gates) {
    out.push_back(g.pose);
  }
  return out;
}

std::vector<Aperture> TrackConfig::apertures() const {
  std::vector<Aperture> out;
  out.reserve(gates.size());
  for (const GateSpec& g : gates) {
    out.push_back(g.aperture);
  }
  return out;
}

Drift drift_step(const Drift& drift, double dt, double sigma_translation, double sigma_yaw, Rng& rng) {
  const double root_dt = std::sqrt(dt);
  Drift out = drift;
  for (int i = 0; i < 3; ++i) {
    out.t[i] += sigma_translation * root_dt * rng.normal();
  }
  out.yaw = wrap_angle(out.yaw + sigma_yaw * root_dt * rng.normal());
  return out;
}

BodyPose body_in_odometry(const BodyPose& world_pose, const Drift& drift) {
  const Rot3 r_ow = yaw_rotation(drift.yaw).transpose();
  return BodyPose{r_ow * world_pose.R, r_ow * (world_pose.t - drift.t), wrap_angle(world_pose.yaw - drift.yaw)};
}

GatePose gate_in_odometry(const GatePose& world_gate, const Drift& drift) {
  const Rot3 r_ow = yaw_rotation(drift.yaw).transpose();
  return GatePose{r_ow * (world_gate.t - drift.t), world_gate.yaw - drift.yaw};
}

Vec3 vector_in_odometry(const Vec3& world_vector, const Drift& drift) {
  return yaw_rotation(drift.yaw).transpose() * world_vector;
}

Vec3 vector_in_world(const Vec3& odometry_vector, const Drift& drift) {
  return yaw_rotation(drift.yaw) * odometry_vector;
}

std::vector<GatePose> perturb_track(std::span<const GatePose> nominal, double rho, Rng& rng) {
  if (!(rho >= 0.0)) {
    throw ConfigError("perturb_track: rho must be nonnegative");
  }
  constexpr double kYawPerMeter = 0.15;
  std::vector<GatePose> out;
  out.reserve(nominal.size());
  for (const GatePose& g : nominal) {
    const double radius = rho * std::sqrt(rng.uniform());
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    const double yaw = (2.0 * rng.uniform() - 1.0) * kYawPerMeter * rho;
    const Vec3 shift(radius * std::cos(angle), radius * std::sin(angle), 0.0);
    out.emplace_back(g.t + shift, g.yaw + yaw);
  }
  return out;
}

Crossing classify_crossing_truth(const Vec3& prev, const Vec3& curr, const GatePose& gate, const Aperture& aperture,
                                 double frame_band) {
  if (curr.z() <= 0.0) {
    return Crossing::crashed;
  }
  const Vec3 p = gate_frame_coords(prev, gate);
  const Vec3 c = gate_frame_coords(curr, gate);
  if (!(p.x() < 0.0 && c.x() >= 0.0)) {
    return Crossing::none;
  }
  const double s = -p.x() / (c.x() - p.x());
  const Vec3 hit = p + s * (c - p);
  if (inside(hit, aperture.half_width, aperture.half_height)) {
    return Crossing::passed;
  }
  if (inside(hit, aperture.half_width + frame_band, aperture.half_height + frame_band)) {
    return Crossing::crashed;
  }
  return Crossing::missed;
}

bool hits_gate_frame(const Vec3& prev, const Vec3& curr, const GatePose& gate, const Aperture& aperture,
                     double frame_band) {
  const std::optional<Vec3> hit = plane_hit(prev, curr, gate);
  return hit && !inside(*hit, aperture.half_width, aperture.half_height) &&
         inside(*hit, aperture.half_width + frame_band, aperture.half_height + frame_band);
}

WorldState move_gate(WorldState world, const GateMove& move) {
  if (move.gate >= world.gates.size()) {
    throw ConfigError("move_gate: gate index " + std::to_string(move.gate) + " out of range");
  }
  world.gates[move.gate] = move.pose;
  return world;
}

std::string_view to_string(PlannerMode mode) { return mode == PlannerMode::full ? "full" : "baseline"; }

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::completed:
      return "completed";
    case Outcome::crashed:
      return "crashed";
    case Outcome::missed:
      return "missed";
    case Outcome::timeout:
      return "timeout";
  }
  return "timeout";
}

PlannerMode parse_planner_mode(std::string_view text) {
  if (text == "full") {
    return PlannerMode::full;
  }
  if (text == "baseline") {
    return PlannerMode::baseline;
  }
  throw ConfigError("unknown planner mode '" + std::string(text) + "' (expected full or baseline)");
}

Outcome parse_outcome(std::string_view text) {
  for (Outcome o : {Outcome::completed, Outcome::crashed, Outcome::missed, Outcome::timeout}) {
    if (to_string(o) == text) {
      return o;
    }
  }
  throw ConfigError("unknown outcome '" + std::string(text) + "'");
}

std::vector<std::string> event_names(std::uint32_t events) {
  static constexpr std::pair<std::uint32_t, const char*> kNames[] = {
      {kEventPerceptionTick, "perception_tick"}, {kEventMeasurement, "measurement"},
      {kEventRejectedOutlier, "outlier"},        {kEventRejectedUpdate, "update_rejected"},
      {kEventBeliefPassed, "belief_passed"},     {kEventBeliefMissed, "belief_missed"},
      {kEventGatePassed, "gate_passed"},         {kEventLap, "lap"},
      {kEventCrash, "crash"},                    {kEventMiss, "miss"},
      {kEventGateMoved, "gate_moved"},
  };
  std::vector<std::string> out;
  for (const auto& [bit, name] : kNames) {
    if (events & bit) {
      out.emplace_back(name);
    }
  }
  return out;
}

double success_fraction(int gates_passed, int required_laps, std::size_t gates_per_lap) {
  const double required = static_cast<double>(required_laps) * static_cast<double>(gates_per_lap);
  return std::min(1.0, static_cast<double>(gates_passed) / required);
}

Rng episode_stream(std::uint64_t seed, Stream s) { return Rng::stream(seed, static_cast<std::uint64_t>(s)); }

RunResult run_episode(const TrackConfig& track, PlannerMode mode, double speed, std::uint64_t seed,
                      const EpisodeOptions& options) {
  track.validate();
  require(std::isfinite(speed) && speed >= 0.0, "speed must be nonnegative");

  const SimConfig& sim = track.sim;
  const double dt = 1.0 / sim.control_rate_hz;
  const int divider = sim.perception_divider();
  const auto max_ticks = static_cast<long>(std::ceil(sim.timeout * sim.control_rate_hz - 1e-9));
  const std::vector<GatePose> nominal = track.gate_poses();
  const std::vector<Aperture> apertures = track.apertures();
  const std::size_t n_gates = nominal.size();
  const double lookahead = track.planner.lookahead(speed);

  Rng perturb_rng = episode_stream(seed, Stream::perturbation);
  Rng drift_rng = episode_stream(seed, Stream::drift);
  Rng perception_rng = episode_stream(seed, Stream::perception);

  SyntheticGateDetector detector(track.camera, track.noise);
  MeasurementSource& source = options.source ? *options.source : detector;

  WorldState world;
  world.gates = perturb_track(nominal, sim.perturbation_radius, perturb_rng);
  const GatePose& first = world.gates.front();
  world.quad.p = first.t - sim.start_distance * first.normal();
  world.quad.yaw = first.yaw;

  std::vector<GateMove> moves = sim.gate_moves;
  std::stable_sort(moves.begin(), moves.end(), [](const GateMove& a, const GateMove& b) { return a.time < b.time; });
  std::size_t next_move = 0;

  TrackMap map = TrackMap::from_prior(nominal, apertures, track.mapping.prior_covariance,
                                      track.mapping.process_noise);

  QuadState vio = vio_state(world.quad, world.drift);
  Vec3 prev_vio_position = vio.p;
  Vec3 anchor = vio.p;
  ProgressTracker progress(std::max(3.0, 2.0 * lookahead));

  std::optional<ReferencePath> baseline_path;
  const Vec3 hold_point = vio.p;

  RunResult result;
  result.outcome = Outcome::timeout;

  for (long tick = 0; tick < max_ticks; ++tick) {
    std::uint32_t events = 0;
    world.time = static_cast<double>(tick) * dt;

    while (next_move < moves.size() && moves[next_move].time <= world.time + 1e-12) {
      world = move_gate(std::move(world), moves[next_move]);
      events |= kEventGateMoved;
      ++next_move;
    }

    vio = vio_state(world.quad, world.drift);
    const BodyPose vio_pose = BodyPose::from_yaw(vio.p, vio.yaw);

    std::optional<PolarMeasurement> measurement;
    if (sim.perception_enabled && tick % divider == 0) {
      events |= kEventPerceptionTick;
      ++result.perception_ticks;
      measurement = source.sample(BodyPose::from_yaw(world.quad.p, world.quad.yaw), world.gates, world.time,
                                  perception_rng);
      if (measurement) {
        events |= kEventMeasurement;
        ++result.measurements;
      }
    }

    ControlInput command;
    if (mode == PlannerMode::full) {
      MapStepResult step = map_step(std::move(map), measurement, vio_pose, prev_vio_position, vio.p);
      map = std::move(step.map);
      if (step.assignment && !step.assignment->accepted) {
        events |= kEventRejectedOutlier;
        ++result.outliers_rejected;
      }
      if (step.update_rejected) {
        events |= kEventRejectedUpdate;
      }
      if (step.traversal == Traversal::passed) {
        events |= kEventBeliefPassed;
        anchor = vio.p;
        progress.reset();
      } else if (step.traversal == Traversal::missed) {
        events |= kEventBeliefMissed;
      }
      const ReferencePath path = plan_race_path(map, track.planner.x_g, anchor, vio.p);
      const double s = progress.update(path, vio.p);
      command = track_step(vio, path, s, speed, lookahead, track.controller);
    } else {
      if (const std::optional<Carrot> carrot = baseline_los_reference(measurement, vio_pose)) {
        const Vec3 to_gate = carrot->point - vio.p;
        if (to_gate.norm() > 1e-6) {
          const Vec3 beyond = carrot->point + track.planner.baseline_overshoot * to_gate.normalized();
          const std::vector<Vec3> pts{vio.p, carrot->point, beyond};
          baseline_path.emplace(pts);
          progress.reset();
        }
      }
      if (baseline_path) {
        const double s = progress.update(*baseline_path, vio.p);
        command = track_step(vio, *baseline_path, s, speed, lookahead, track.controller);
      } else {
        const std::vector<ReferenceStep> hold(static_cast<std::size_t>(track.controller.horizon_steps),
                                              ReferenceStep{hold_point, vio.yaw, Vec3::Zero()});
        command = solve_receding_horizon(vio, hold, track.controller).first;
      }
    }
    prev_vio_position = vio.p;

    // Commands live in the odometry frame; the vehicle flies in the world.
    const ControlInput world_command{vector_in_world(command.a, world.drift), command.yaw_rate};
    const Vec3 prev_position = world.quad.p;
    world.quad = propagate_dynamics(world.quad, world_command, dt);
    world.drift = drift_step(world.drift, dt, sim.drift_sigma_translation, sim.drift_sigma_yaw, drift_rng);
    const Vec3& curr_position = world.quad.p;

    bool finished = false;
    for (std::size_t g = 0; g < n_gates && !finished; ++g) {
      if (g != world.next_gate &&
          hits_gate_frame(prev_position, curr_position, world.gates[g], apertures[g], sim.frame_band)) {
        events |= kEventCrash;
        result.outcome = Outcome::crashed;
        finished = true;
      }
    }
    if (!finished) {
      const std::size_t g = world.next_gate;
      Crossing c = classify_crossing_truth(prev_position, curr_position, world.gates[g], apertures[g], sim.frame_band);
      if (c == Crossing::none &&
          hits_gate_frame(prev_position, curr_position, world.gates[g], apertures[g], sim.frame_band)) {
        c = Crossing::crashed;
      }
      switch (c) {
        case Crossing::passed:
          events |= kEventGatePassed;
          ++world.gates_passed;
          world.next_gate = (g + 1) % n_gates;
          if (world.next_gate == 0) {
            ++world.laps;
            events |= kEventLap;
            if (world.laps >= sim.required_laps) {
              result.outcome = Outcome::completed;
              finished = true;
            }
          }
          break;
        case Crossing::crashed:
          events |= kEventCrash;
          result.outcome = Outcome::crashed;
          finished = true;
          break;
        case Crossing::missed:
          events |= kEventMiss;
          result.outcome = Outcome::missed;
          finished = true;
          break;
        case Crossing::none:
          break;
      }
    }

    ++result.control_ticks;
    world.time = static_cast<double>(tick + 1) * dt;
    if (options.record_log) {
      TickRecord rec;
      rec.time = world.time;
      rec.truth = world.quad;
      rec.vio = vio;
      rec.command = command;
      rec.events = events;
      if (mode == PlannerMode::full) {
        rec.beliefs.reserve(map.size());
        for (const GateBelief& b : map.beliefs) {
          rec.beliefs.push_back(b.x);
        }
      }
      result.log.push_back(std::move(rec));
    }
    if (finished) {
      break;
    }
  }

  result.gates_passed = world.gates_passed;
  result.laps_completed = world.laps;
  result.success_fraction = success_fraction(world.gates_passed, sim.required_laps, n_gates);
  result.elapsed = world.time;
  result.final_drift = world.drift;
  result.true_gates = world.gates;
  if (mode == PlannerMode::full) {
    result.final_beliefs = map.beliefs;
  }
  return result;
}

}  // namespace gaterace
