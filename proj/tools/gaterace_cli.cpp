// gaterace: fly single episodes, run success-rate sweeps, validate track files.
//
// Exit codes: 0 success, 2 configuration error, 3 internal error.

#include "gaterace/simulator.hpp"
#include "gaterace/sweep.hpp"
#include "gaterace/track_file.hpp"
#include "gaterace/trajectory_log.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInternal = 3;

struct RunArgs {
  std::string track;
  double speed = 1.0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::string mode = "full";
  std::string log;
};

struct SweepArgs {
  std::string track;
  std::vector<double> speeds{1.0};
  std::vector<double> rhos{0.0};
  int seeds = 5;
  std::vector<std::string> modes{"full"};
  std::string out;
  std::string format = "csv";
  std::uint64_t base_seed = 0;
};

int cmd_run(const RunArgs& args) {
  gaterace::TrackConfig track = gaterace::load_track_file(args.track);
  track.sim.perturbation_radius = args.rho;
  gaterace::EpisodeOptions options;
  options.record_log = !args.log.empty();
  const gaterace::RunResult result =
      gaterace::run_episode(track, gaterace::parse_planner_mode(args.mode), args.speed, args.seed, options);
  if (options.record_log) {
    std::ofstream out(args.log);
    if (!out) {
      throw gaterace::ConfigError("cannot write log file '" + args.log + "'");
    }
    gaterace::write_trajectory_log(out, result);
  }
  std::cout << gaterace::summary_json(result) << '\n';
  return 0;
}

int cmd_sweep(const SweepArgs& args) {
  const gaterace::TrackConfig track = gaterace::load_track_file(args.track);
  gaterace::SweepSpec spec;
  spec.speeds = args.speeds;
  spec.perturbations = args.rhos;
  spec.seeds_per_cell = args.seeds;
  spec.modes.clear();
  for (const std::string& m : args.modes) {
    spec.modes.push_back(gaterace::parse_planner_mode(m));
  }
  const gaterace::ResultFormat format = gaterace::parse_result_format(args.format);
  const gaterace::ResultTable table = gaterace::run_sweep(spec, track, args.base_seed);
  const std::string text = gaterace::emit_results(table, format);
  if (args.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(args.out, std::ios::binary);
    if (!out) {
      throw gaterace::ConfigError("cannot write output file '" + args.out + "'");
    }
    out << text;
  }
  return 0;
}

int cmd_check(const std::string& path) {
  const gaterace::TrackConfig track = gaterace::load_track_file(path);
  std::cout << "ok: " << track.name << " (" << track.gates.size() << " gates)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drone racing simulation with per-gate EKF mapping"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Fly a single episode");
  run->add_option("--track", run_args.track, "Track file")->required();
  run->add_option("--speed", run_args.speed, "Commanded speed [m/s]");
  run->add_option("--rho", run_args.rho, "Gate perturbation radius [m]");
  run->add_option("--seed", run_args.seed, "Episode seed");
  run->add_option("--mode", run_args.mode, "Planner mode: full or baseline");
  run->add_option("--log", run_args.log, "Write the per-tick trajectory log (JSON lines)");

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "Success rate over a speed x perturbation grid");
  sweep->add_option("--track", sweep_args.track, "Track file")->required();
  sweep->add_option("--speeds", sweep_args.speeds, "Commanded speeds [m/s]")->delimiter(',');
  sweep->add_option("--rhos", sweep_args.rhos, "Perturbation radii [m]")->delimiter(',');
  sweep->add_option("--seeds", sweep_args.seeds, "Seeds per cell");
  sweep->add_option("--modes", sweep_args.modes, "Planner modes")->delimiter(',');
  sweep->add_option("--out", sweep_args.out, "Output file (stdout if omitted)");
  sweep->add_option("--format", sweep_args.format, "csv or jsonl");
  sweep->add_option("--base-seed", sweep_args.base_seed, "Base seed");

  std::string check_path;
  CLI::App* check = app.add_subcommand("check", "Validate a track file");
  check->add_option("--track,track", check_path, "Track file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      return cmd_run(run_args);
    }
    if (*sweep) {
      return cmd_sweep(sweep_args);
    }
    return cmd_check(check_path);
  } catch (const gaterace::TrackFileError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
