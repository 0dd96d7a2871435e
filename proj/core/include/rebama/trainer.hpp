#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "rebama/checkpoint.hpp"
#include "rebama/city.hpp"
#include "rebama/game.hpp"
#include "rebama/neural.hpp"
#include "rebama/projection.hpp"

namespace rebama {

struct TrainerConfig {
  double gamma = 0.99;
  int batch_size = 600;
  double learning_rate = 1e-3;
  double tau = 0.01;
  double delta = 0.1;  // regression step toward the LP vertex
  int episodes = 300;
  int steps_per_episode = 48;
  double beta = 1.0;
  AdversaryBox box;
  double exploration_sigma = 0.1;
  bool baseline = false;  // adversary disabled
  std::uint64_t seed = 0;
  int replay_capacity = 50000;
  ProjectionMethod projection = ProjectionMethod::dykstra;
  DykstraOptions dykstra;
  EmptySpotRule empty_spot_rule = EmptySpotRule::as_printed;
  double observation_scale = 0.0;  // 0 selects default_observation_scale
  int hidden = Mlp::kHidden;

  bool operator==(const TrainerConfig&) const = default;
};

// Throws ValidationError on an out-of-range field.
void validate(const TrainerConfig& config, const Scenario& scenario);

// Projects the present entries of a padded region action onto its two dispatch
// simplices; absent slots come back zero. `polytope` may carry a prebuilt
// H-representation of the region's simplex product for the Dykstra path.
Eigen::VectorXd project_region_action(const Eigen::VectorXd& padded, const RegionGrid& grid,
                                      int region, ProjectionMethod method,
                                      const DykstraOptions& options = {},
                                      const HPolytope* polytope = nullptr);

struct JointState {
  std::vector<LocalState> regions;
  int t = 0;
};

struct Transition {
  JointState state;
  Eigen::MatrixXd region_actions;     // padded, one column per region
  Eigen::MatrixXd adversary_actions;  // 3 x N
  double reward = 0.0;
  JointState next;
};

// Bounded FIFO; once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);

  // Returns the slot written.
  std::size_t push(Transition transition);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  // Uniform with replacement.
  std::vector<std::size_t> sample(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

struct Networks {
  Mlp region;
  Mlp adversary;
  Mlp critic;
};

struct EpisodeMetrics {
  int episode = 0;
  double mean_reward = 0.0;
  double mean_u_c = 0.0;
  double mean_u_s = 0.0;
  double critic_loss = 0.0;  // mean squared TD error over this episode's updates, 0 without updates
  double region_return = 0.0;
  double adversary_return = 0.0;
  int updates = 0;

  bool operator==(const EpisodeMetrics&) const = default;
};

struct TrainerState {
  Networks online;
  Networks target;
  Networks snapshot;  // refreshed once at the start of every episode
  AdamState region_opt;
  AdamState adversary_opt;
  AdamState critic_opt;
  ReplayBuffer buffer;
  int episode = 0;
  long steps = 0;
  long policy_updates = 0;
  long critic_updates = 0;
  long target_updates = 0;
  long snapshots_taken = 0;
  std::vector<EpisodeMetrics> log;
};

struct ActionPair {
  Eigen::MatrixXd adversary;  // 3 x N
  Eigen::MatrixXd region;     // padded x N, feasible
  Eigen::MatrixXd region_observations;
};

struct RegressionTargets {
  Eigen::MatrixXd region_observations;     // D x (B*N)
  Eigen::MatrixXd region_targets;          // padded x (B*N)
  Eigen::MatrixXd adversary_observations;  // D x (B*N)
  Eigen::MatrixXd adversary_targets;       // 3 x (B*N)
  Eigen::MatrixXd masks;                   // padded x (B*N)
};

struct PolicyGradientPair {
  Eigen::VectorXd regression;     // gradient of the regression loss
  Eigen::VectorXd deterministic;  // phi * sum over batch of grad_a q * grad_theta mu
};

class Trainer {
 public:
  Trainer(Scenario scenario, TrainerConfig config);

  const Scenario& scenario() const { return scenario_; }
  const TrainerConfig& config() const { return config_; }
  const ObservationLayout& layout() const { return layout_; }
  TrainerState& state() { return state_; }
  const TrainerState& state() const { return state_; }

  int critic_input_size() const;
  Eigen::VectorXd critic_input(const JointState& s, const Eigen::MatrixXd& region_actions,
                               const Eigen::MatrixXd& adversary_actions) const;

  // Adversaries act on true observations, region agents on the perturbed ones,
  // both through the episode snapshot networks. Outputs are projected onto
  // D_a / D_r; with `explore`, Gaussian noise is added before projecting.
  ActionPair select_actions(const JointState& s, bool explore);

  // Feasible regression targets for the sampled transitions (policy side `phi`
  // is +1 for regions and -1 for adversaries).
  RegressionTargets regression_targets(std::span<const std::size_t> batch) const;
  static Eigen::VectorXd blend(const Eigen::VectorXd& projected, const Eigen::VectorXd& vertex,
                               double delta);

  // One Adam step on each policy toward its regression targets. Returns the two losses.
  std::pair<double, double> update_policies(std::span<const std::size_t> batch);
  // One Adam step on the critic; returns the mean squared TD error.
  double update_critic(std::span<const std::size_t> batch);
  // TD targets y = r + gamma * q'(s', mu_a'(o_a'), mu_r'(o_r')).
  Eigen::VectorXd td_targets(std::span<const std::size_t> batch) const;

  // Unconstrained variant: targets mu(o|snapshot) + eta * phi * grad_a q, no
  // projection. Compares its loss gradient with the deterministic policy gradient.
  PolicyGradientPair unconstrained_gradients(std::span<const std::size_t> batch, bool region_side,
                                             double eta) const;

  void take_snapshot();
  void update_targets();
  EpisodeMetrics run_episode();

  // Runs config.episodes episodes. `on_episode` sees every finished episode.
  const std::vector<EpisodeMetrics>& train(
      const std::function<void(const Trainer&, const EpisodeMetrics&)>& on_episode = {});

  Checkpoint checkpoint() const;

  // Feasible region action (padded) from raw network output for one region.
  Eigen::VectorXd project_region(const Eigen::VectorXd& padded, int region) const;
  Eigen::VectorXd project_adversary(const Eigen::VectorXd& a) const;

  std::uint64_t episode_seed(int episode) const;

 private:
  Eigen::MatrixXd region_observations(const JointState& s,
                                      const Eigen::MatrixXd& adversary_actions) const;
  // Regression targets depend only on the snapshot and the stored transition,
  // so they are memoized per buffer slot until the next snapshot.
  RegressionTargets cached_regression_targets(std::span<const std::size_t> batch);

  struct SlotTargets {
    bool valid = false;
    Eigen::MatrixXd region_observations;
    Eigen::MatrixXd region_targets;
    Eigen::MatrixXd adversary_observations;
    Eigen::MatrixXd adversary_targets;
  };

  Scenario scenario_;
  TrainerConfig config_;
  ObservationLayout layout_;
  Eigen::MatrixXd masks_;
  std::vector<SimplexProduct> region_domains_;
  std::vector<HPolytope> region_polytopes_;
  Box box_;
  HPolytope box_polytope_;
  TrainerState state_;
  std::vector<SlotTargets> target_cache_;
  std::mt19937_64 sample_rng_;
  std::mt19937_64 region_noise_rng_;
  std::mt19937_64 adversary_noise_rng_;
};

}  // namespace rebama
