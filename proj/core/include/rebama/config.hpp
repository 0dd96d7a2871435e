#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rebama/city.hpp"
#include "rebama/eval.hpp"
#include "rebama/trainer.hpp"

namespace rebama {

// Shortest decimal string that reads back to the same double.
std::string format_double(double value);

// Scenario files are INI-style:
//
//   [grid]        width, height
//   [stations]    spots
//   [fleet]       vehicles, battery_min, battery_max
//   [demand]      horizon, rate, od.<origin>
//   [battery]     threshold, idle_drain, trip_drain, drain_on_relocation
//   [durations]   charge, trip_base, trip_per_hop
//
// Per-region values are comma-separated lists in row-major region order; a
// single value is broadcast to every region. Missing od rows default to
// uniform over all regions. Unknown sections or keys, duplicates and
// malformed values are rejected with the offending line number.
Scenario parse_scenario_text(const std::string& text);
Scenario parse_scenario(const std::filesystem::path& path);

// Canonical form: every section and key in the order above, lists fully expanded.
std::string serialize_scenario(const Scenario& scenario);

// 16 hex digits identifying the canonical scenario text.
std::string scenario_fingerprint(const Scenario& scenario);

// Run files use sections [run], [trainer], [adversary] and [eval]. Every key
// is optional; see serialize_run_config for the full list with defaults.
struct RunConfig {
  std::filesystem::path scenario_path;  // resolved against the run file's directory
  Scenario scenario;
  TrainerConfig trainer;
  EvalOptions eval;
  std::filesystem::path output_dir{"runs"};
  int checkpoint_interval = 50;  // episodes between checkpoints, 0 keeps only the final one
};

// `base_dir` resolves relative paths. Loads and validates the referenced scenario.
RunConfig parse_run_config_text(const std::string& text, const std::filesystem::path& base_dir);
RunConfig parse_run_config(const std::filesystem::path& path);

// Effective configuration with every default spelled out.
std::string serialize_run_config(const RunConfig& config);

// episode,mean_reward,mean_u_c,mean_u_s,critic_loss
std::string metrics_csv(const std::vector<EpisodeMetrics>& log);
// Throws ValidationError on an empty log, IoError when the file cannot be written.
void export_metrics(const std::vector<EpisodeMetrics>& log, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace rebama
