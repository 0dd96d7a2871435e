#include "rebama/run.hpp"

#include <cstdlib>

#include "rebama/error.hpp"

namespace rebama {

namespace {

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

std::filesystem::path resolve_output(const std::filesystem::path& path) {
  const char* root = std::getenv(kOutputRootVariable);
  if (root == nullptr || *root == '\0' || path.is_absolute()) return path;
  return std::filesystem::path(root) / path;
}

TrainOutcome run_training(const RunConfig& config, const std::filesystem::path& directory,
                          const std::function<void(const EpisodeMetrics&)>& progress) {
  ensure_directory(directory);
  write_text_file(directory / "effective_config.ini", serialize_run_config(config));

  Trainer trainer(config.scenario, config.trainer);
  const auto metrics_path = directory / "metrics.csv";
  try {
    trainer.train([&](const Trainer& t, const EpisodeMetrics& m) {
      const int k = config.checkpoint_interval;
      if (k > 0 && m.episode % k == 0 && m.episode < config.trainer.episodes) {
        save_checkpoint(directory / ("checkpoint_" + std::to_string(m.episode) + ".bin"),
                        t.checkpoint());
      }
      if (progress) progress(m);
    });
  } catch (...) {
    if (!trainer.state().log.empty()) export_metrics(trainer.state().log, metrics_path);
    throw;
  }

  TrainOutcome out;
  out.log = trainer.state().log;
  out.checkpoint = trainer.checkpoint();
  out.directory = directory;
  export_metrics(out.log, metrics_path);
  save_checkpoint(directory / "final.bin", out.checkpoint);
  return out;
}

EvalReport run_evaluation(const std::filesystem::path& checkpoint_path,
                          const std::filesystem::path& scenario_path, const EvalOptions& options,
                          const std::filesystem::path& report_path) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const Scenario scenario = parse_scenario(scenario_path);
  const EvalReport report = evaluate(checkpoint, scenario, options);
  if (report_path.has_parent_path()) ensure_directory(report_path.parent_path());
  write_text_file(report_path, report_to_json(report));
  auto csv_path = report_path;
  csv_path.replace_extension(".csv");
  write_text_file(csv_path, report_csv(report));
  return report;
}

}  // namespace rebama
