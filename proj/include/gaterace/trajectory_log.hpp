#pragma once

#include "gaterace/simulator.hpp"

#include <ostream>
#include <string>

namespace gaterace {

/// One JSON object per control tick:
/// {"t", "truth":{"p","v","yaw"}, "vio":{...}, "beliefs":[[x,y,z,yaw],...],
///  "command":{"a","yaw_rate"}, "events":[...]}
std::string tick_to_json(const TickRecord& record);

void write_trajectory_log(std::ostream& out, const RunResult& result);

/// Single-line episode summary used by the CLI.
std::string summary_json(const RunResult& result);

}  // namespace gaterace
