#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rebama/checkpoint.hpp"
#include "rebama/city.hpp"
#include "rebama/game.hpp"
#include "rebama/projection.hpp"

namespace rebama {

// Maps a batch of region observations (one column per region) to raw padded
// region actions. The masks mark which slots exist for each region.
using RegionPolicy =
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd& observations, const Eigen::MatrixXd& masks)>;

RegionPolicy network_policy(const Mlp& region_policy);

struct RolloutOptions {
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  double beta = 1.0;
  int steps = 0;  // 0 runs the whole horizon
  ProjectionMethod projection = ProjectionMethod::dykstra;
  DykstraOptions dykstra;
};

struct RolloutResult {
  double mean_reward = 0.0;
  double mean_u_c = 0.0;
  double mean_u_s = 0.0;
  std::vector<JointAction> actions;
  std::vector<StepLog> steps;
  std::vector<FleetState> states;  // state after each step
};

// One episode of a frozen region policy with the adversary disabled. Noise,
// when sigma > 0, is added to the local-state features of the observations
// only; the simulator always sees the projected actions.
RolloutResult rollout(const Scenario& scenario, const ObservationLayout& layout,
                      const RegionPolicy& policy, std::uint64_t env_seed,
                      const RolloutOptions& options);

struct EvalOptions {
  double noise_sigma = 1.0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double beta = 1.0;
  ProjectionMethod projection = ProjectionMethod::dykstra;
};

struct EvalRun {
  std::uint64_t seed = 0;
  double mean_reward = 0.0;
  double mean_u_c = 0.0;
  double mean_u_s = 0.0;

  bool operator==(const EvalRun&) const = default;
};

struct EvalReport {
  std::string scenario_id;
  double noise_sigma = 0.0;
  double beta = 1.0;
  std::vector<EvalRun> runs;
  double mean_reward = 0.0;
  double mean_u_c = 0.0;
  double mean_u_s = 0.0;

  bool operator==(const EvalReport&) const = default;
};

// Averages the runs into the report means (in seed order).
void aggregate(EvalReport& report);

EvalReport evaluate(const RegionPolicy& policy, const Scenario& scenario,
                    const ObservationLayout& layout, const EvalOptions& options);
// Throws ValidationError when the checkpoint was trained on a different grid shape.
EvalReport evaluate(const Checkpoint& checkpoint, const Scenario& scenario,
                    const EvalOptions& options);

struct ComparisonRow {
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  double increasing_rate = 0.0;  // percent
};

// (a - b) / |b| * 100; less negative fairness counts as an improvement.
double increasing_rate(double a, double b);

// Rows for average reward, u_s and u_c. Throws ValidationError when the
// reports come from different scenarios or seed lists.
std::vector<ComparisonRow> compare(const EvalReport& a, const EvalReport& b);
std::vector<ComparisonRow> compare_values(double reward_a, double reward_b, double us_a,
                                          double us_b, double uc_a, double uc_b);

std::string format_comparison(const std::vector<ComparisonRow>& rows, const std::string& label_a,
                              const std::string& label_b);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

std::string report_to_json(const EvalReport& report);
// Throws ValidationError on malformed JSON or missing fields.
EvalReport report_from_json(const std::string& text);
// seed,mean_reward,mean_u_c,mean_u_s rows followed by a "mean" row.
std::string report_csv(const EvalReport& report);

}  // namespace rebama
