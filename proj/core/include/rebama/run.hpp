#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rebama/checkpoint.hpp"
#include "rebama/config.hpp"
#include "rebama/eval.hpp"
#include "rebama/trainer.hpp"

namespace rebama {

// Environment variable that, when set, roots every relative output path.
inline constexpr const char* kOutputRootVariable = "REBAMA_OUTPUT_ROOT";

std::filesystem::path resolve_output(const std::filesystem::path& path);

struct TrainOutcome {
  std::vector<EpisodeMetrics> log;
  Checkpoint checkpoint;
  std::filesystem::path directory;
};

// Trains into `directory` (created if needed):
//   effective_config.ini   the configuration actually used
//   metrics.csv            one row per finished episode
//   checkpoint_<e>.bin     every checkpoint_interval episodes
//   final.bin              after the last episode
// If training throws, the metrics of the finished episodes are still written.
TrainOutcome run_training(const RunConfig& config, const std::filesystem::path& directory,
                          const std::function<void(const EpisodeMetrics&)>& progress = {});

// Writes `report_path` (JSON) and the same path with a .csv extension.
EvalReport run_evaluation(const std::filesystem::path& checkpoint_path,
                          const std::filesystem::path& scenario_path, const EvalOptions& options,
                          const std::filesystem::path& report_path);

}  // namespace rebama
