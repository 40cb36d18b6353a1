#include "gaterace/trajectory_log.hpp"

#include <nlohmann/json.hpp>

namespace gaterace {

namespace {

nlohmann::json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v[i]);
  }
  return out;
}

nlohmann::json state(const QuadState& s) {
  return {{"p", vec(s.p)}, {"v", vec(s.v)}, {"yaw", s.yaw}};
}

}  // namespace

std::string tick_to_json(const TickRecord& record) {
  nlohmann::ordered_json j;
  j["t"] = record.time;
  j["truth"] = state(record.truth);
  j["vio"] = state(record.vio);
  nlohmann::json beliefs = nlohmann::json::array();
  for (const Vec4& b : record.beliefs) {
    beliefs.push_back(vec(b));
  }
  j["beliefs"] = std::move(beliefs);
  j["command"] = {{"a", vec(record.command.a)}, {"yaw_rate", record.command.yaw_rate}};
  j["events"] = event_names(record.events);
  return j.dump();
}

void write_trajectory_log(std::ostream& out, const RunResult& result) {
  for (const TickRecord& r : result.log) {
    out << tick_to_json(r) << '\n';
  }
}

std::string summary_json(const RunResult& result) {
  nlohmann::ordered_json j;
  j["outcome"] = std::string(to_string(result.outcome));
  j["gates_passed"] = result.gates_passed;
  j["laps"] = result.laps_completed;
  j["success_fraction"] = result.success_fraction;
  j["elapsed_s"] = result.elapsed;
  j["measurements"] = result.measurements;
  j["outliers_rejected"] = result.outliers_rejected;
  return j.dump();
}

}  // namespace gaterace
