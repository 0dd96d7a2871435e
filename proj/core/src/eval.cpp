#include "rebama/eval.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "json.hpp"
#include "rebama/config.hpp"
#include "rebama/error.hpp"
#include "rebama/trainer.hpp"

namespace rebama {

namespace {
constexpr std::uint64_t kNoiseStream = 401;
}  // namespace

RegionPolicy network_policy(const Mlp& region_policy) {
  return [net = region_policy](const Eigen::MatrixXd& obs, const Eigen::MatrixXd& masks) {
    return net.forward(obs, masks);
  };
}

RolloutResult rollout(const Scenario& scenario, const ObservationLayout& layout,
                      const RegionPolicy& policy, std::uint64_t env_seed,
                      const RolloutOptions& options) {
  const auto& grid = scenario.grid;
  const int steps = options.steps > 0 ? options.steps : scenario.demand.horizon;
  const Eigen::MatrixXd masks = action_masks(grid);
  std::mt19937_64 noise_rng(mix_seed(options.noise_seed, kNoiseStream));
  std::normal_distribution<double> standard(0.0, 1.0);

  FleetState fleet = initial_state(grid, scenario.fleet, scenario.demand, env_seed);
  RolloutResult result;
  for (int t = 0; t < steps; ++t) {
    const auto states = local_states(fleet);
    Eigen::MatrixXd obs = observe(states, states, fleet.t, grid, layout);
    if (options.noise_sigma > 0.0) {
      for (Eigen::Index c = 0; c < obs.cols(); ++c) {
        for (int r = 0; r < layout.local_features(); ++r) {
          obs(r, c) += options.noise_sigma * standard(noise_rng);
        }
      }
    }
    const Eigen::MatrixXd raw = policy(obs, masks);
    if (raw.rows() != masks.rows() || raw.cols() != masks.cols()) {
      throw ValidationError("region policy returned an action matrix of the wrong shape");
    }
    JointAction joint(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
      const Eigen::VectorXd feasible =
          project_region_action(raw.col(i), grid, i, options.projection, options.dykstra);
      joint[i] = unpad_action(feasible, grid, i);
    }
    result.steps.push_back(
        step_environment(fleet, joint, grid, scenario.demand, step_seed(env_seed, t)));
    result.actions.push_back(std::move(joint));
    result.states.push_back(fleet);

    const Fairness f = compute_fairness(local_states(fleet));
    result.mean_reward += reward_from(f, options.beta);
    result.mean_u_c += f.charging;
    result.mean_u_s += f.supply;
  }
  result.mean_reward /= steps;
  result.mean_u_c /= steps;
  result.mean_u_s /= steps;
  return result;
}

void aggregate(EvalReport& report) {
  report.mean_reward = report.mean_u_c = report.mean_u_s = 0.0;
  if (report.runs.empty()) return;
  for (const auto& run : report.runs) {
    report.mean_reward += run.mean_reward;
    report.mean_u_c += run.mean_u_c;
    report.mean_u_s += run.mean_u_s;
  }
  const double n = static_cast<double>(report.runs.size());
  report.mean_reward /= n;
  report.mean_u_c /= n;
  report.mean_u_s /= n;
}

EvalReport evaluate(const RegionPolicy& policy, const Scenario& scenario,
                    const ObservationLayout& layout, const EvalOptions& options) {
  if (options.seeds.empty()) throw ValidationError("evaluation needs at least one seed");
  if (!(options.noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  EvalReport report;
  report.scenario_id = scenario_fingerprint(scenario);
  report.noise_sigma = options.noise_sigma;
  report.beta = options.beta;
  for (const auto seed : options.seeds) {
    RolloutOptions ro;
    ro.noise_sigma = options.noise_sigma;
    ro.noise_seed = seed;
    ro.beta = options.beta;
    ro.projection = options.projection;
    const RolloutResult r = rollout(scenario, layout, policy, seed, ro);
    report.runs.push_back({seed, r.mean_reward, r.mean_u_c, r.mean_u_s});
  }
  aggregate(report);
  return report;
}

EvalReport evaluate(const Checkpoint& checkpoint, const Scenario& scenario,
                    const EvalOptions& options) {
  const auto& grid = scenario.grid;
  if (checkpoint.grid_width != grid.width() || checkpoint.grid_height != grid.height()) {
    throw ValidationError("checkpoint was trained on a " + std::to_string(checkpoint.grid_width) +
                          "x" + std::to_string(checkpoint.grid_height) +
                          " grid, scenario grid is " + std::to_string(grid.width()) + "x" +
                          std::to_string(grid.height()));
  }
  const ObservationLayout layout(grid, scenario.demand.horizon, checkpoint.observation_scale);
  if (checkpoint.region_policy.input_size() != layout.dimension() ||
      checkpoint.region_policy.output_size() != padded_action_size(grid)) {
    throw ValidationError("checkpoint region policy does not match the scenario's observation layout");
  }
  return evaluate(network_policy(checkpoint.region_policy), scenario, layout, options);
}

double increasing_rate(double a, double b) { return (a - b) / std::abs(b) * 100.0; }

std::vector<ComparisonRow> compare_values(double reward_a, double reward_b, double us_a,
                                          double us_b, double uc_a, double uc_b) {
  return {
      {"average reward", reward_a, reward_b, increasing_rate(reward_a, reward_b)},
      {"average u_s", us_a, us_b, increasing_rate(us_a, us_b)},
      {"average u_c", uc_a, uc_b, increasing_rate(uc_a, uc_b)},
  };
}

std::vector<ComparisonRow> compare(const EvalReport& a, const EvalReport& b) {
  if (a.scenario_id != b.scenario_id) {
    throw ValidationError("reports come from different scenarios (" + a.scenario_id + " vs " +
                          b.scenario_id + ")");
  }
  std::vector<std::uint64_t> seeds_a, seeds_b;
  for (const auto& r : a.runs) seeds_a.push_back(r.seed);
  for (const auto& r : b.runs) seeds_b.push_back(r.seed);
  if (seeds_a != seeds_b) throw ValidationError("reports use different seed lists");
  return compare_values(a.mean_reward, b.mean_reward, a.mean_u_s, b.mean_u_s, a.mean_u_c,
                        b.mean_u_c);
}

std::string format_comparison(const std::vector<ComparisonRow>& rows, const std::string& label_a,
                              const std::string& label_b) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %14s %14s %16s\n", "Metric", label_b.c_str(),
                label_a.c_str(), "Increasing Rate");
  os << line;
  for (const auto& row : rows) {
    const char* arrow = row.increasing_rate >= 0.0 ? "up" : "down";
    std::snprintf(line, sizeof line, "%-16s %14.2f %14.2f %10s %.2f%%\n", row.metric.c_str(), row.b,
                  row.a, arrow, std::abs(row.increasing_rate));
    os << line;
  }
  return os.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "metric,a,b,increasing_rate_percent\n";
  for (const auto& row : rows) {
    os << row.metric << ',' << format_double(row.a) << ',' << format_double(row.b) << ','
       << format_double(row.increasing_rate) << '\n';
  }
  return os.str();
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["scenario_id"] = report.scenario_id;
  j["noise_sigma"] = report.noise_sigma;
  j["beta"] = report.beta;
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& run : report.runs) {
    nlohmann::ordered_json r;
    r["seed"] = run.seed;
    r["mean_reward"] = run.mean_reward;
    r["mean_u_c"] = run.mean_u_c;
    r["mean_u_s"] = run.mean_u_s;
    j["runs"].push_back(r);
  }
  j["mean_reward"] = report.mean_reward;
  j["mean_u_c"] = report.mean_u_c;
  j["mean_u_s"] = report.mean_u_s;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport report;
    report.scenario_id = j.at("scenario_id").get<std::string>();
    report.noise_sigma = j.at("noise_sigma").get<double>();
    report.beta = j.at("beta").get<double>();
    for (const auto& r : j.at("runs")) {
      report.runs.push_back({r.at("seed").get<std::uint64_t>(), r.at("mean_reward").get<double>(),
                             r.at("mean_u_c").get<double>(), r.at("mean_u_s").get<double>()});
    }
    report.mean_reward = j.at("mean_reward").get<double>();
    report.mean_u_c = j.at("mean_u_c").get<double>();
    report.mean_u_s = j.at("mean_u_s").get<double>();
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "seed,mean_reward,mean_u_c,mean_u_s\n";
  for (const auto& run : report.runs) {
    os << run.seed << ',' << format_double(run.mean_reward) << ',' << format_double(run.mean_u_c)
       << ',' << format_double(run.mean_u_s) << '\n';
  }
  os << "mean," << format_double(report.mean_reward) << ',' << format_double(report.mean_u_c)
     << ',' << format_double(report.mean_u_s) << '\n';
  return os.str();
}

}  // namespace rebama
