#include "gaterace/track_file.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace gaterace {

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : 0; }

[[noreturn]] void fail(const std::string& what, const YAML::Node& node) {
  const int line = line_of(node);
  throw TrackFileError(line > 0 ? "line " + std::to_string(line) + ": " + what : what, line);
}

void check_keys(const YAML::Node& map, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!map.IsMap()) {
    fail(where + ": expected a mapping", map);
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!ok.contains(key)) {
      fail("unknown key '" + key + "' in " + where, kv.first);
    }
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) {
    fail(field + ": expected a scalar", node);
  }
  try {
    return node.as<T>();
  } catch (const YAML::BadConversion&) {
    fail(field + ": cannot convert '" + node.Scalar() + "'", node);
  }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, const std::string& where, T& out) {
  if (const YAML::Node n = parent[key]) {
    out = scalar<T>(n, where + "." + key);
  }
}

template <int N>
Eigen::Matrix<double, N, 1> vector_of(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() != static_cast<std::size_t>(N)) {
    fail(field + ": expected a list of " + std::to_string(N) + " numbers", node);
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    v[i] = scalar<double>(node[static_cast<std::size_t>(i)], field);
  }
  return v;
}

// Rethrows validation failures with the field's line when it can be located.
template <typename Fn>
void validated(const YAML::Node& node, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    fail(e.what(), node);
  } catch (const GeometryError& e) {
    fail(e.what(), node);
  } catch (const ControlError& e) {
    fail(e.what(), node);
  }
}

GateSpec parse_gate(const YAML::Node& node, std::size_t index) {
  const std::string where = "gates[" + std::to_string(index) + "]";
  check_keys(node, where, {"position", "yaw", "aperture"});
  if (!node["position"]) {
    fail(where + ".position is required", node);
  }
  GateSpec g;
  const Vec3 position = vector_of<3>(node["position"], where + ".position");
  double yaw = 0.0;
  read(node, "yaw", where, yaw);
  g.pose = GatePose(position, yaw);
  if (const YAML::Node ap = node["aperture"]) {
    const Eigen::Vector2d a = vector_of<2>(ap, where + ".aperture");
    g.aperture = Aperture{a[0], a[1]};
    if (!(a[0] > 0.0) || !(a[1] > 0.0)) {
      fail(where + ".aperture: half_width and half_height must be positive", ap);
    }
  }
  if (!(position.z() > 0.0)) {
    fail(where + ".position: z must be above ground", node["position"]);
  }
  return g;
}

void parse_camera(const YAML::Node& node, CameraModel& cam) {
  check_keys(node, "camera", {"horizontal_half_fov", "vertical_half_fov", "max_range", "min_range"});
  read(node, "horizontal_half_fov", "camera", cam.horizontal_half_fov);
  read(node, "vertical_half_fov", "camera", cam.vertical_half_fov);
  read(node, "max_range", "camera", cam.max_range);
  read(node, "min_range", "camera", cam.min_range);
  validated(node, [&] { cam.validate(); });
}

void parse_noise(const YAML::Node& node, NoiseModel& noise) {
  check_keys(node, "noise", {"base_sigma", "range_growth", "angle_growth", "miscalibration_factor"});
  if (const YAML::Node s = node["base_sigma"]) {
    noise.base_sigma = vector_of<4>(s, "noise.base_sigma");
  }
  read(node, "range_growth", "noise", noise.range_growth);
  read(node, "angle_growth", "noise", noise.angle_growth);
  read(node, "miscalibration_factor", "noise", noise.miscalibration_factor);
  validated(node, [&] { noise.validate(); });
}

void parse_sim(const YAML::Node& node, std::size_t gate_count, SimConfig& sim) {
  check_keys(node, "sim",
             {"control_rate_hz", "perception_rate_hz", "drift_translation", "drift_yaw", "perturbation_radius",
              "timeout", "required_laps", "frame_band", "start_distance", "perception_enabled", "gate_moves"});
  read(node, "control_rate_hz", "sim", sim.control_rate_hz);
  read(node, "perception_rate_hz", "sim", sim.perception_rate_hz);
  read(node, "drift_translation", "sim", sim.drift_sigma_translation);
  read(node, "drift_yaw", "sim", sim.drift_sigma_yaw);
  read(node, "perturbation_radius", "sim", sim.perturbation_radius);
  read(node, "timeout", "sim", sim.timeout);
  read(node, "required_laps", "sim", sim.required_laps);
  read(node, "frame_band", "sim", sim.frame_band);
  read(node, "start_distance", "sim", sim.start_distance);
  read(node, "perception_enabled", "sim", sim.perception_enabled);
  if (const YAML::Node moves = node["gate_moves"]) {
    if (!moves.IsSequence()) {
      fail("sim.gate_moves: expected a list", moves);
    }
    for (std::size_t i = 0; i < moves.size(); ++i) {
      const YAML::Node m = moves[i];
      const std::string where = "sim.gate_moves[" + std::to_string(i) + "]";
      check_keys(m, where, {"time", "gate", "position", "yaw"});
      if (!m["time"] || !m["gate"] || !m["position"]) {
        fail(where + ": time, gate and position are required", m);
      }
      GateMove move;
      move.time = scalar<double>(m["time"], where + ".time");
      const long gate = scalar<long>(m["gate"], where + ".gate");
      if (gate < 0 || static_cast<std::size_t>(gate) >= gate_count) {
        fail(where + ".gate must index one of the " + std::to_string(gate_count) + " gates", m["gate"]);
      }
      move.gate = static_cast<std::size_t>(gate);
      double yaw = 0.0;
      read(m, "yaw", where, yaw);
      move.pose = GatePose(vector_of<3>(m["position"], where + ".position"), yaw);
      sim.gate_moves.push_back(move);
    }
  }
  validated(node, [&] { sim.validate(); });
}

void parse_controller(const YAML::Node& node, MpcConfig& mpc) {
  check_keys(node, "controller", {"horizon_steps", "dt", "q", "r", "a_max", "omega_max", "v_max"});
  read(node, "horizon_steps", "controller", mpc.horizon_steps);
  read(node, "dt", "controller", mpc.dt);
  if (const YAML::Node q = node["q"]) {
    mpc.q_diag = vector_of<7>(q, "controller.q");
  }
  if (const YAML::Node r = node["r"]) {
    mpc.r_diag = vector_of<4>(r, "controller.r");
  }
  read(node, "a_max", "controller", mpc.a_max);
  read(node, "omega_max", "controller", mpc.omega_max);
  read(node, "v_max", "controller", mpc.v_max);
  validated(node, [&] { mpc.validate(); });
}

void parse_planner(const YAML::Node& node, PlannerConfig& planner) {
  check_keys(node, "planner", {"x_g", "lookahead_min", "lookahead_time", "baseline_overshoot"});
  read(node, "x_g", "planner", planner.x_g);
  read(node, "lookahead_min", "planner", planner.lookahead_min);
  read(node, "lookahead_time", "planner", planner.lookahead_time);
  read(node, "baseline_overshoot", "planner", planner.baseline_overshoot);
  validated(node, [&] { planner.validate(); });
}

void parse_mapping(const YAML::Node& node, MappingConfig& mapping) {
  check_keys(node, "mapping", {"process_noise", "prior_covariance"});
  if (const YAML::Node q = node["process_noise"]) {
    mapping.process_noise = vector_of<4>(q, "mapping.process_noise").asDiagonal();
  }
  if (const YAML::Node p = node["prior_covariance"]) {
    mapping.prior_covariance = vector_of<4>(p, "mapping.prior_covariance").asDiagonal();
  }
  validated(node, [&] { mapping.validate(); });
}

}  // namespace

TrackConfig parse_track_file(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    const int line = e.mark.line >= 0 ? e.mark.line + 1 : 0;
    throw TrackFileError("line " + std::to_string(line) + ": syntax error: " + e.msg, line);
  }
  if (!root || root.IsNull()) {
    throw TrackFileError("track file is empty", 0);
  }
  check_keys(root, "track file", {"name", "gates", "camera", "noise", "sim", "controller", "planner", "mapping"});

  TrackConfig cfg;
  if (const YAML::Node name = root["name"]) {
    cfg.name = scalar<std::string>(name, "name");
  }
  const YAML::Node gates = root["gates"];
  if (!gates || !gates.IsSequence()) {
    fail("gates: expected a list of gates", gates ? gates : root);
  }
  for (std::size_t i = 0; i < gates.size(); ++i) {
    cfg.gates.push_back(parse_gate(gates[i], i));
  }
  if (cfg.gates.size() < 2) {
    fail("gates: a track needs at least 2 gates", gates);
  }
  if (const YAML::Node n = root["camera"]) {
    parse_camera(n, cfg.camera);
  }
  if (const YAML::Node n = root["noise"]) {
    parse_noise(n, cfg.noise);
  }
  if (const YAML::Node n = root["sim"]) {
    parse_sim(n, cfg.gates.size(), cfg.sim);
  }
  if (const YAML::Node n = root["controller"]) {
    parse_controller(n, cfg.controller);
  }
  if (const YAML::Node n = root["planner"]) {
    parse_planner(n, cfg.planner);
  }
  if (const YAML::Node n = root["mapping"]) {
    parse_mapping(n, cfg.mapping);
  }
  validated(root, [&] { cfg.validate(); });
  return cfg;
}

TrackConfig load_track_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw TrackFileError("cannot open track file '" + path.string() + "'", 0);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_track_file(ss.str());
}

}  // namespace gaterace
