#include "gaterace/sweep.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace gaterace {

namespace {

constexpr const char* kCsvHeader = "mode,speed_mps,rho_m,seed,outcome,gates_passed,laps,success_fraction,elapsed_s";

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) {
      break;
    }
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) {
    throw std::runtime_error("results: bad number '" + s + "'");
  }
  return v;
}

long long to_integer(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) {
    throw std::runtime_error("results: bad integer '" + s + "'");
  }
  return v;
}

}  // namespace

void SweepSpec::validate() const {
  if (speeds.empty() || perturbations.empty() || modes.empty()) {
    throw ConfigError("sweep: speeds, perturbations and modes must be nonempty");
  }
  if (seeds_per_cell < 1) {
    throw ConfigError("sweep: seeds per cell must be at least 1");
  }
  for (double v : speeds) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("sweep: speeds must be nonnegative");
    }
  }
  for (double r : perturbations) {
    if (!std::isfinite(r) || r < 0.0) {
      throw ConfigError("sweep: perturbations must be nonnegative");
    }
  }
}

std::uint64_t episode_seed(std::uint64_t base_seed, std::size_t /*cell*/, int replicate) {
  return base_seed + static_cast<std::uint64_t>(replicate);
}

unsigned sweep_thread_count() {
  if (const char* env = std::getenv("GATERACE_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) {
      return static_cast<unsigned>(n);
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ResultTable run_sweep(const SweepSpec& spec, const TrackConfig& track, std::uint64_t base_seed, unsigned threads) {
  spec.validate();
  track.validate();

  struct Job {
    std::size_t cell;
    PlannerMode mode;
    double speed;
    double rho;
    int replicate;
  };
  std::vector<Job> jobs;
  std::size_t cell = 0;
  for (PlannerMode mode : spec.modes) {
    for (double speed : spec.speeds) {
      for (double rho : spec.perturbations) {
        for (int r = 0; r < spec.seeds_per_cell; ++r) {
          jobs.push_back({cell, mode, speed, rho, r});
        }
        ++cell;
      }
    }
  }

  ResultTable table(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      try {
        TrackConfig cfg = track;
        cfg.sim.perturbation_radius = job.rho;
        const std::uint64_t seed = episode_seed(base_seed, job.cell, job.replicate);
        const RunResult r = run_episode(cfg, job.mode, job.speed, seed);
        table[i] = ResultRow{job.mode,       job.speed, job.rho, seed, r.outcome, r.gates_passed, r.laps_completed,
                             r.success_fraction, r.elapsed};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
      }
    }
  };

  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(threads ? threads : sweep_thread_count(), static_cast<unsigned>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
  return table;
}

double mean_success(const ResultTable& table, PlannerMode mode, double speed, double rho) {
  double sum = 0.0;
  int n = 0;
  for (const ResultRow& row : table) {
    if (row.mode == mode && row.speed == speed && row.rho == rho) {
      sum += row.success_fraction;
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

ResultFormat parse_result_format(std::string_view text) {
  if (text == "csv") {
    return ResultFormat::csv;
  }
  if (text == "jsonl" || text == "json-lines") {
    return ResultFormat::json_lines;
  }
  throw ConfigError("unknown result format '" + std::string(text) + "' (expected csv or jsonl)");
}

std::string emit_results(const ResultTable& table, ResultFormat format) {
  std::ostringstream out;
  if (format == ResultFormat::csv) {
    out << kCsvHeader << '\n';
    for (const ResultRow& r : table) {
      out << to_string(r.mode) << ',' << fixed(r.speed, 2) << ',' << fixed(r.rho, 2) << ',' << r.seed << ','
          << to_string(r.outcome) << ',' << r.gates_passed << ',' << r.laps << ',' << fixed(r.success_fraction, 4)
          << ',' << fixed(r.elapsed, 3) << '\n';
    }
    return out.str();
  }
  for (const ResultRow& r : table) {
    out << "{\"mode\":\"" << to_string(r.mode) << "\",\"speed_mps\":" << fixed(r.speed, 2)
        << ",\"rho_m\":" << fixed(r.rho, 2) << ",\"seed\":" << r.seed << ",\"outcome\":\"" << to_string(r.outcome)
        << "\",\"gates_passed\":" << r.gates_passed << ",\"laps\":" << r.laps
        << ",\"success_fraction\":" << fixed(r.success_fraction, 4) << ",\"elapsed_s\":" << fixed(r.elapsed, 3)
        << "}\n";
  }
  return out.str();
}

ResultTable parse_results(std::string_view text, ResultFormat format) {
  ResultTable table;
  std::vector<std::string> lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) {
    lines.pop_back();
  }
  if (format == ResultFormat::csv) {
    if (lines.empty() || lines.front() != kCsvHeader) {
      throw std::runtime_error("results: missing or unexpected CSV header");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const std::vector<std::string> f = split(lines[i], ',');
      if (f.size() != 9) {
        throw std::runtime_error("results: line " + std::to_string(i + 1) + " has " + std::to_string(f.size()) +
                                 " fields, expected 9");
      }
      ResultRow r;
      r.mode = parse_planner_mode(f[0]);
      r.speed = to_double(f[1]);
      r.rho = to_double(f[2]);
      r.seed = static_cast<std::uint64_t>(std::stoull(f[3]));
      r.outcome = parse_outcome(f[4]);
      r.gates_passed = static_cast<int>(to_integer(f[5]));
      r.laps = static_cast<int>(to_integer(f[6]));
      r.success_fraction = to_double(f[7]);
      r.elapsed = to_double(f[8]);
      table.push_back(r);
    }
    return table;
  }
  for (const std::string& line : lines) {
    if (line.empty()) {
      continue;
    }
    const nlohmann::json j = nlohmann::json::parse(line);
    ResultRow r;
    r.mode = parse_planner_mode(j.at("mode").get<std::string>());
    r.speed = j.at("speed_mps").get<double>();
    r.rho = j.at("rho_m").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.outcome = parse_outcome(j.at("outcome").get<std::string>());
    r.gates_passed = j.at("gates_passed").get<int>();
    r.laps = j.at("laps").get<int>();
    r.success_fraction = j.at("success_fraction").get<double>();
    r.elapsed = j.at("elapsed_s").get<double>();
    table.push_back(r);
  }
  return table;
}

}  // namespace gaterace
