#pragma once

#include "gaterace/simulator.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gaterace {

/// Syntax or semantic problem in a track file. line() is 1-based, 0 when
/// the problem is not tied to a line.
class TrackFileError : public std::runtime_error {
 public:
  TrackFileError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses and validates a YAML track file. Missing optional sections take
/// their defaults; unknown keys are rejected.
TrackConfig parse_track_file(std::string_view text);

TrackConfig load_track_file(const std::filesystem::path& path);

}  // namespace gaterace
