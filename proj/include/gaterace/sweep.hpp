#pragma once

#include "gaterace/simulator.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gaterace {

/// Grid of (mode, speed, rho) cells with seeds_per_cell replicates each.
struct SweepSpec {
  std::vector<double> speeds;
  std::vector<double> perturbations;
  int seeds_per_cell = 1;
  std::vector<PlannerMode> modes{PlannerMode::full};

  void validate() const;
  std::size_t cell_count() const { return modes.size() * speeds.size() * perturbations.size(); }
};

struct ResultRow {
  PlannerMode mode = PlannerMode::full;
  double speed = 0.0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::timeout;
  int gates_passed = 0;
  int laps = 0;
  double success_fraction = 0.0;
  double elapsed = 0.0;

  bool operator==(const ResultRow&) const = default;
};

using ResultTable = std::vector<ResultRow>;

/// Episode seed for a replicate. Every cell uses the same seed list, so
/// cells differing only in speed or rho are compared on paired seeds.
std::uint64_t episode_seed(std::uint64_t base_seed, std::size_t cell, int replicate);

/// Worker count: GATERACE_THREADS if set to a positive integer, otherwise
/// the hardware concurrency.
unsigned sweep_thread_count();

/// Runs every cell; rows are ordered by cell (mode, speed, rho nesting)
/// then replicate, independent of scheduling.
ResultTable run_sweep(const SweepSpec& spec, const TrackConfig& track, std::uint64_t base_seed,
                      unsigned threads = 0);

/// Mean success fraction of the rows matching a cell.
double mean_success(const ResultTable& table, PlannerMode mode, double speed, double rho);

enum class ResultFormat { csv, json_lines };

ResultFormat parse_result_format(std::string_view text);

/// CSV columns: mode,speed_mps,rho_m,seed,outcome,gates_passed,laps,
/// success_fraction,elapsed_s. Speed and rho use 2 decimals, success 4,
/// elapsed 3. JSON lines carry the same keys, one object per row.
std::string emit_results(const ResultTable& table, ResultFormat format);

/// Inverse of emit_results. Throws std::runtime_error on malformed input.
ResultTable parse_results(std::string_view text, ResultFormat format);

}  // namespace gaterace
