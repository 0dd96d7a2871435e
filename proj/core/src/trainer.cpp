#include "rebama/trainer.hpp"

#include <cmath>

#include "rebama/error.hpp"

namespace rebama {

namespace {

constexpr std::uint64_t kRegionInit = 101;
constexpr std::uint64_t kAdversaryInit = 102;
constexpr std::uint64_t kCriticInit = 103;
constexpr std::uint64_t kSampleStream = 201;
constexpr std::uint64_t kRegionNoiseStream = 202;
constexpr std::uint64_t kAdversaryNoiseStream = 203;
constexpr std::uint64_t kEpisodeStream = 301;

Box make_box(const AdversaryBox& box) {
  Box b;
  b.lower = Eigen::Map<const Eigen::Vector3d>(box.lower.data());
  b.upper = Eigen::Map<const Eigen::Vector3d>(box.upper.data());
  return b;
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

void validate(const TrainerConfig& config, const Scenario& scenario) {
  if (!(config.gamma > 0.0 && config.gamma < 1.0)) {
    throw ValidationError("trainer.gamma must lie in (0, 1)");
  }
  if (config.batch_size < 1) throw ValidationError("trainer.batch_size must be >= 1");
  if (!(config.learning_rate > 0.0)) throw ValidationError("trainer.learning_rate must be > 0");
  if (!(config.tau > 0.0 && config.tau <= 1.0)) throw ValidationError("trainer.tau must lie in (0, 1]");
  if (!(config.delta > 0.0 && config.delta <= 1.0)) {
    throw ValidationError("trainer.delta must lie in (0, 1]");
  }
  if (config.episodes < 1) throw ValidationError("trainer.episodes must be >= 1");
  if (config.steps_per_episode < 1) throw ValidationError("trainer.steps_per_episode must be >= 1");
  if (config.steps_per_episode > scenario.demand.horizon) {
    throw ValidationError("trainer.steps_per_episode exceeds demand.horizon");
  }
  if (!(config.beta >= 0.0)) throw ValidationError("trainer.beta must be >= 0");
  if (!(config.exploration_sigma >= 0.0)) {
    throw ValidationError("trainer.exploration_sigma must be >= 0");
  }
  if (config.replay_capacity < 1) throw ValidationError("trainer.replay_capacity must be >= 1");
  if (!(config.observation_scale >= 0.0)) {
    throw ValidationError("trainer.observation_scale must be >= 0");
  }
  if (config.hidden < 1) throw ValidationError("trainer.hidden must be >= 1");
  if (!(config.dykstra.tol > 0.0)) throw ValidationError("trainer.dykstra_tol must be > 0");
  if (config.dykstra.max_iter < 1) throw ValidationError("trainer.dykstra_max_iter must be >= 1");
  validate(config.box);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("replay capacity must be >= 1");
}

std::size_t ReplayBuffer::push(Transition transition) {
  const std::size_t slot = next_;
  if (items_.size() < capacity_) {
    items_.push_back(std::move(transition));
  } else {
    items_[slot] = std::move(transition);
  }
  next_ = (next_ + 1) % capacity_;
  return slot;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  if (items_.empty()) throw ValidationError("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = pick(rng);
  return out;
}

Trainer::Trainer(Scenario scenario, TrainerConfig config)
    : scenario_(std::move(scenario)),
      config_(std::move(config)),
      box_(make_box(config_.box)),
      box_polytope_(box_.polytope()),
      sample_rng_(mix_seed(config_.seed, kSampleStream)),
      region_noise_rng_(mix_seed(config_.seed, kRegionNoiseStream)),
      adversary_noise_rng_(mix_seed(config_.seed, kAdversaryNoiseStream)) {
  validate(scenario_.demand, scenario_.grid);
  validate(scenario_.fleet, scenario_.grid, scenario_.demand);
  validate(config_, scenario_);
  const auto& grid = scenario_.grid;
  const double scale = config_.observation_scale > 0.0
                           ? config_.observation_scale
                           : default_observation_scale(grid, scenario_.fleet.total());
  layout_ = ObservationLayout(grid, scenario_.demand.horizon, scale);
  masks_ = action_masks(grid);
  for (int i = 0; i < grid.size(); ++i) {
    const int n = grid.action_size(i);
    region_domains_.push_back(SimplexProduct{{n, n}});
    region_polytopes_.push_back(region_domains_.back().polytope());
  }

  const int obs = layout_.dimension();
  const int padded = padded_action_size(grid);
  auto& online = state_.online;
  online.region = Mlp::initialized(obs, padded, Head::softmax(2),
                                   mix_seed(config_.seed, kRegionInit), config_.hidden);
  online.adversary = Mlp::initialized(obs, AdversaryAction::kSize,
                                      Head::bounded(box_.lower, box_.upper),
                                      mix_seed(config_.seed, kAdversaryInit), config_.hidden);
  online.critic = Mlp::initialized(critic_input_size(), 1, Head::linear(),
                                   mix_seed(config_.seed, kCriticInit), config_.hidden);
  state_.target = online;
  state_.snapshot = online;
  state_.region_opt =
      AdamState::for_parameters(online.region.parameter_count(), config_.learning_rate);
  state_.adversary_opt =
      AdamState::for_parameters(online.adversary.parameter_count(), config_.learning_rate);
  state_.critic_opt =
      AdamState::for_parameters(online.critic.parameter_count(), config_.learning_rate);
  state_.buffer = ReplayBuffer(static_cast<std::size_t>(config_.replay_capacity));
}

int Trainer::critic_input_size() const {
  const int n = scenario_.grid.size();
  return layout_.state_dimension(n) + n * padded_action_size(scenario_.grid) +
         n * AdversaryAction::kSize;
}

Eigen::VectorXd Trainer::critic_input(const JointState& s, const Eigen::MatrixXd& region_actions,
                                      const Eigen::MatrixXd& adversary_actions) const {
  const int n = scenario_.grid.size();
  const int state_dim = layout_.state_dimension(n);
  const int padded = padded_action_size(scenario_.grid);
  Eigen::VectorXd x(critic_input_size());
  x.head(state_dim) = state_features(s.regions, s.t, layout_);
  x.segment(state_dim, n * padded) = region_actions.reshaped();
  x.tail(n * AdversaryAction::kSize) = adversary_actions.reshaped();
  return x;
}

Eigen::VectorXd project_region_action(const Eigen::VectorXd& padded, const RegionGrid& grid,
                                      int region, ProjectionMethod method,
                                      const DykstraOptions& options, const HPolytope* polytope) {
  const int slots = grid.dispatch_slots();
  const auto entries = grid.entry_slots(region);
  const auto n = static_cast<Eigen::Index>(entries.size());
  Eigen::VectorXd compact(2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    compact[j] = padded[entries[j]];
    compact[n + j] = padded[slots + entries[j]];
  }
  const SimplexProduct domain{{static_cast<int>(n), static_cast<int>(n)}};
  Eigen::VectorXd projected;
  if (method == ProjectionMethod::dykstra) {
    projected = polytope != nullptr ? dykstra_project(compact, *polytope, options)
                                    : dykstra_project(compact, domain.polytope(), options);
  } else {
    projected = project(compact, domain, ProjectionMethod::closed_form);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(padded.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    out[entries[j]] = projected[j];
    out[slots + entries[j]] = projected[n + j];
  }
  return out;
}

Eigen::VectorXd Trainer::project_region(const Eigen::VectorXd& padded, int region) const {
  return project_region_action(padded, scenario_.grid, region, config_.projection,
                               config_.dykstra, &region_polytopes_[region]);
}

Eigen::VectorXd Trainer::project_adversary(const Eigen::VectorXd& a) const {
  if (config_.projection == ProjectionMethod::dykstra) {
    return dykstra_project(a, box_polytope_, config_.dykstra);
  }
  return project_box(a, box_);
}

Eigen::MatrixXd Trainer::region_observations(const JointState& s,
                                             const Eigen::MatrixXd& adversary_actions) const {
  std::vector<LocalState> own(s.regions.size());
  for (std::size_t i = 0; i < own.size(); ++i) {
    own[i] = perturb_state(s.regions[i],
                           to_adversary_action(adversary_actions.col(static_cast<Eigen::Index>(i))),
                           config_.empty_spot_rule);
  }
  return observe(s.regions, own, s.t, scenario_.grid, layout_);
}

ActionPair Trainer::select_actions(const JointState& s, bool explore) {
  const auto& grid = scenario_.grid;
  const int n = grid.size();
  const auto& net = state_.snapshot;
  ActionPair out;

  out.adversary = Eigen::MatrixXd::Zero(AdversaryAction::kSize, n);
  if (!config_.baseline) {
    const Eigen::MatrixXd obs = observe(s.regions, s.regions, s.t, grid, layout_);
    Eigen::MatrixXd raw = net.adversary.forward(obs);
    if (explore && config_.exploration_sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, config_.exploration_sigma);
      for (Eigen::Index k = 0; k < raw.size(); ++k) raw(k) += noise(adversary_noise_rng_);
    }
    for (int i = 0; i < n; ++i) out.adversary.col(i) = project_adversary(raw.col(i));
  }

  out.region_observations = region_observations(s, out.adversary);
  Eigen::MatrixXd raw = net.region.forward(out.region_observations, masks_);
  if (explore && config_.exploration_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, config_.exploration_sigma);
    for (Eigen::Index k = 0; k < raw.size(); ++k) {
      if (masks_(k) != 0.0) raw(k) += noise(region_noise_rng_);
    }
  }
  out.region.resize(raw.rows(), n);
  for (int i = 0; i < n; ++i) out.region.col(i) = project_region(raw.col(i), i);
  return out;
}

Eigen::VectorXd Trainer::blend(const Eigen::VectorXd& projected, const Eigen::VectorXd& vertex,
                               double delta) {
  return (1.0 - delta) * projected + delta * vertex;
}

RegressionTargets Trainer::regression_targets(std::span<const std::size_t> batch) const {
  const auto& grid = scenario_.grid;
  const int n = grid.size();
  const auto b_count = static_cast<Eigen::Index>(batch.size());
  const int dim = layout_.dimension();
  const int padded = padded_action_size(grid);
  const int slots = grid.dispatch_slots();
  const int state_dim = layout_.state_dimension(n);
  const auto& net = state_.snapshot;

  RegressionTargets out;
  out.adversary_observations.resize(dim, b_count * n);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const auto& s = state_.buffer[batch[b]].state;
    out.adversary_observations.middleCols(b * n, n) = observe(s.regions, s.regions, s.t, grid, layout_);
  }

  Eigen::MatrixXd adversary = Eigen::MatrixXd::Zero(AdversaryAction::kSize, b_count * n);
  if (!config_.baseline) {
    const Eigen::MatrixXd raw = net.adversary.forward(out.adversary_observations);
    for (Eigen::Index c = 0; c < raw.cols(); ++c) adversary.col(c) = project_adversary(raw.col(c));
  }

  out.region_observations.resize(dim, b_count * n);
  out.masks.resize(padded, b_count * n);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const auto& s = state_.buffer[batch[b]].state;
    out.region_observations.middleCols(b * n, n) =
        region_observations(s, adversary.middleCols(b * n, n));
    out.masks.middleCols(b * n, n) = masks_;
  }
  const Eigen::MatrixXd raw_region = net.region.forward(out.region_observations, out.masks);
  Eigen::MatrixXd region(padded, b_count * n);
  for (Eigen::Index c = 0; c < raw_region.cols(); ++c) {
    region.col(c) = project_region(raw_region.col(c), static_cast<int>(c % n));
  }

  Eigen::MatrixXd critic_in(critic_input_size(), b_count);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    critic_in.col(b) = critic_input(state_.buffer[batch[b]].state, region.middleCols(b * n, n),
                                    adversary.middleCols(b * n, n));
  }
  Mlp::Cache cache;
  net.critic.forward(critic_in, cache);
  const Eigen::MatrixXd grad = net.critic.input_gradient(cache, Eigen::MatrixXd::Ones(1, b_count));

  out.region_targets.resize(padded, b_count * n);
  out.adversary_targets.resize(AdversaryAction::kSize, b_count * n);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Index c = b * n + i;
      // Region agents maximize q (phi = +1) over their two dispatch simplices.
      const auto entries = grid.entry_slots(i);
      const auto m = static_cast<Eigen::Index>(entries.size());
      Eigen::VectorXd g(2 * m);
      for (Eigen::Index j = 0; j < m; ++j) {
        g[j] = grad(state_dim + i * padded + entries[j], b);
        g[m + j] = grad(state_dim + i * padded + slots + entries[j], b);
      }
      const Eigen::VectorXd vertex = lp_vertex_argmax(g, region_domains_[i]);
      Eigen::VectorXd padded_vertex = Eigen::VectorXd::Zero(padded);
      for (Eigen::Index j = 0; j < m; ++j) {
        padded_vertex[entries[j]] = vertex[j];
        padded_vertex[slots + entries[j]] = vertex[m + j];
      }
      out.region_targets.col(c) = blend(region.col(c), padded_vertex, config_.delta);

      // Adversaries minimize q (phi = -1) over the box.
      const Eigen::VectorXd ga =
          -grad.block(state_dim + n * padded + AdversaryAction::kSize * i, b, AdversaryAction::kSize, 1);
      out.adversary_targets.col(c) =
          blend(adversary.col(c), lp_vertex_argmax(ga, box_), config_.delta);
    }
  }
  return out;
}

RegressionTargets Trainer::cached_regression_targets(std::span<const std::size_t> batch) {
  if (target_cache_.size() < state_.buffer.size()) target_cache_.resize(state_.buffer.size());
  std::vector<std::size_t> missing;
  for (const auto slot : batch) {
    if (!target_cache_[slot].valid) {
      target_cache_[slot].valid = true;  // claimed; filled below
      missing.push_back(slot);
    }
  }
  const int n = scenario_.grid.size();
  if (!missing.empty()) {
    const RegressionTargets fresh = regression_targets(missing);
    for (std::size_t k = 0; k < missing.size(); ++k) {
      auto& entry = target_cache_[missing[k]];
      const auto col = static_cast<Eigen::Index>(k) * n;
      entry.region_observations = fresh.region_observations.middleCols(col, n);
      entry.region_targets = fresh.region_targets.middleCols(col, n);
      entry.adversary_observations = fresh.adversary_observations.middleCols(col, n);
      entry.adversary_targets = fresh.adversary_targets.middleCols(col, n);
    }
  }

  const auto b_count = static_cast<Eigen::Index>(batch.size());
  RegressionTargets out;
  out.region_observations.resize(layout_.dimension(), b_count * n);
  out.region_targets.resize(masks_.rows(), b_count * n);
  out.adversary_observations.resize(layout_.dimension(), b_count * n);
  out.adversary_targets.resize(AdversaryAction::kSize, b_count * n);
  out.masks.resize(masks_.rows(), b_count * n);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const auto& entry = target_cache_[batch[b]];
    out.region_observations.middleCols(b * n, n) = entry.region_observations;
    out.region_targets.middleCols(b * n, n) = entry.region_targets;
    out.adversary_observations.middleCols(b * n, n) = entry.adversary_observations;
    out.adversary_targets.middleCols(b * n, n) = entry.adversary_targets;
    out.masks.middleCols(b * n, n) = masks_;
  }
  return out;
}

std::pair<double, double> Trainer::update_policies(std::span<const std::size_t> batch) {
  const int n = scenario_.grid.size();
  const RegressionTargets targets = cached_regression_targets(batch);
  auto& online = state_.online;

  Mlp::Cache cache;
  const Eigen::MatrixXd region_out =
      online.region.forward(targets.region_observations, cache, targets.masks);
  const Eigen::MatrixXd region_diff = region_out - targets.region_targets;
  const double region_loss = region_diff.squaredNorm() / n;
  require_finite(region_loss, "region policy loss");
  const auto region_grad = online.region.backward(cache, (2.0 / n) * region_diff);
  adam_step(online.region.parameters(), region_grad.parameters, state_.region_opt);

  double adversary_loss = 0.0;
  if (!config_.baseline) {
    const Eigen::MatrixXd adv_out = online.adversary.forward(targets.adversary_observations, cache);
    const Eigen::MatrixXd adv_diff = adv_out - targets.adversary_targets;
    adversary_loss = adv_diff.squaredNorm() / n;
    require_finite(adversary_loss, "adversary policy loss");
    const auto adv_grad = online.adversary.backward(cache, (2.0 / n) * adv_diff);
    adam_step(online.adversary.parameters(), adv_grad.parameters, state_.adversary_opt);
  }
  ++state_.policy_updates;
  return {region_loss, adversary_loss};
}

Eigen::VectorXd Trainer::td_targets(std::span<const std::size_t> batch) const {
  const auto& grid = scenario_.grid;
  const int n = grid.size();
  const auto b_count = static_cast<Eigen::Index>(batch.size());
  const auto& net = state_.target;

  Eigen::MatrixXd adversary = Eigen::MatrixXd::Zero(AdversaryAction::kSize, b_count * n);
  if (!config_.baseline) {
    Eigen::MatrixXd obs(layout_.dimension(), b_count * n);
    for (Eigen::Index b = 0; b < b_count; ++b) {
      const auto& s = state_.buffer[batch[b]].next;
      obs.middleCols(b * n, n) = observe(s.regions, s.regions, s.t, grid, layout_);
    }
    adversary = net.adversary.forward(obs);
  }
  Eigen::MatrixXd region_obs(layout_.dimension(), b_count * n);
  Eigen::MatrixXd masks(masks_.rows(), b_count * n);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    region_obs.middleCols(b * n, n) =
        region_observations(state_.buffer[batch[b]].next, adversary.middleCols(b * n, n));
    masks.middleCols(b * n, n) = masks_;
  }
  const Eigen::MatrixXd region = net.region.forward(region_obs, masks);

  Eigen::MatrixXd next_in(critic_input_size(), b_count);
  Eigen::VectorXd rewards(b_count);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const auto& tr = state_.buffer[batch[b]];
    next_in.col(b) =
        critic_input(tr.next, region.middleCols(b * n, n), adversary.middleCols(b * n, n));
    rewards[b] = tr.reward;
  }
  const Eigen::MatrixXd next_q = net.critic.forward(next_in);
  return rewards + config_.gamma * next_q.row(0).transpose();
}

double Trainer::update_critic(std::span<const std::size_t> batch) {
  const auto b_count = static_cast<Eigen::Index>(batch.size());
  const Eigen::VectorXd y = td_targets(batch);
  Eigen::MatrixXd in(critic_input_size(), b_count);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const auto& tr = state_.buffer[batch[b]];
    in.col(b) = critic_input(tr.state, tr.region_actions, tr.adversary_actions);
  }
  auto& critic = state_.online.critic;
  Mlp::Cache cache;
  const Eigen::MatrixXd q = critic.forward(in, cache);
  const Eigen::RowVectorXd diff = q.row(0) - y.transpose();
  const double loss = diff.squaredNorm();
  require_finite(loss, "critic loss");
  const auto grad = critic.backward(cache, 2.0 * diff);
  adam_step(critic.parameters(), grad.parameters, state_.critic_opt);
  ++state_.critic_updates;
  return loss / static_cast<double>(b_count);
}

PolicyGradientPair Trainer::unconstrained_gradients(std::span<const std::size_t> batch,
                                                    bool region_side, double eta) const {
  const auto& grid = scenario_.grid;
  const int n = grid.size();
  const auto b_count = static_cast<Eigen::Index>(batch.size());
  const int padded = padded_action_size(grid);
  const int state_dim = layout_.state_dimension(n);
  const auto& snap = state_.snapshot;

  Eigen::MatrixXd adversary_obs(layout_.dimension(), b_count * n);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    const auto& s = state_.buffer[batch[b]].state;
    adversary_obs.middleCols(b * n, n) = observe(s.regions, s.regions, s.t, grid, layout_);
  }
  const Eigen::MatrixXd adversary = snap.adversary.forward(adversary_obs);
  Eigen::MatrixXd region_obs(layout_.dimension(), b_count * n);
  Eigen::MatrixXd masks(padded, b_count * n);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    region_obs.middleCols(b * n, n) =
        region_observations(state_.buffer[batch[b]].state, adversary.middleCols(b * n, n));
    masks.middleCols(b * n, n) = masks_;
  }
  const Eigen::MatrixXd region = snap.region.forward(region_obs, masks);

  Eigen::MatrixXd critic_in(critic_input_size(), b_count);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    critic_in.col(b) = critic_input(state_.buffer[batch[b]].state, region.middleCols(b * n, n),
                                    adversary.middleCols(b * n, n));
  }
  Mlp::Cache cache;
  snap.critic.forward(critic_in, cache);
  const Eigen::MatrixXd grad = snap.critic.input_gradient(cache, Eigen::MatrixXd::Ones(1, b_count));

  const double phi = region_side ? 1.0 : -1.0;
  const Mlp& live = region_side ? state_.online.region : state_.online.adversary;
  const Eigen::MatrixXd& obs = region_side ? region_obs : adversary_obs;
  const Eigen::MatrixXd& snapshot_out = region_side ? region : adversary;
  const int width = region_side ? padded : AdversaryAction::kSize;
  const int offset = region_side ? state_dim : state_dim + n * padded;

  Eigen::MatrixXd action_grad(width, b_count * n);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    for (int i = 0; i < n; ++i) {
      action_grad.col(b * n + i) = phi * grad.block(offset + i * width, b, width, 1);
    }
  }
  const Eigen::MatrixXd targets = snapshot_out + eta * action_grad;

  Mlp::Cache live_cache;
  const Eigen::MatrixXd out = region_side ? live.forward(obs, live_cache, masks)
                                          : live.forward(obs, live_cache);
  PolicyGradientPair pair;
  pair.regression = live.backward(live_cache, (2.0 / n) * (out - targets)).parameters;
  pair.deterministic = live.backward(live_cache, action_grad / n).parameters;
  return pair;
}

void Trainer::take_snapshot() {
  state_.snapshot = state_.online;
  for (auto& entry : target_cache_) entry.valid = false;
  ++state_.snapshots_taken;
}

void Trainer::update_targets() {
  soft_update(state_.target.region.parameters(), state_.online.region.parameters(), config_.tau);
  soft_update(state_.target.adversary.parameters(), state_.online.adversary.parameters(),
              config_.tau);
  soft_update(state_.target.critic.parameters(), state_.online.critic.parameters(), config_.tau);
  ++state_.target_updates;
}

std::uint64_t Trainer::episode_seed(int episode) const {
  return mix_seed(mix_seed(config_.seed, kEpisodeStream), static_cast<std::uint64_t>(episode));
}

EpisodeMetrics Trainer::run_episode() {
  const auto& grid = scenario_.grid;
  take_snapshot();
  const int episode = state_.episode;
  const std::uint64_t env_seed = episode_seed(episode);
  FleetState fleet = initial_state(grid, scenario_.fleet, scenario_.demand, env_seed);

  EpisodeMetrics m;
  m.episode = episode + 1;
  double loss_sum = 0.0;
  const auto batch_size = static_cast<std::size_t>(config_.batch_size);
  for (int t = 0; t < config_.steps_per_episode; ++t) {
    JointState s{local_states(fleet), fleet.t};
    ActionPair actions = select_actions(s, true);
    JointAction joint(grid.size());
    for (int i = 0; i < grid.size(); ++i) joint[i] = unpad_action(actions.region.col(i), grid, i);
    step_environment(fleet, joint, grid, scenario_.demand, step_seed(env_seed, t));

    JointState next{local_states(fleet), fleet.t};
    const Fairness fairness = compute_fairness(next.regions);
    const double reward = reward_from(fairness, config_.beta);
    m.mean_reward += reward;
    m.mean_u_c += fairness.charging;
    m.mean_u_s += fairness.supply;
    m.region_return += reward;
    m.adversary_return -= reward;

    const std::size_t slot = state_.buffer.push(Transition{
        std::move(s), std::move(actions.region), std::move(actions.adversary), reward,
        std::move(next)});
    if (slot < target_cache_.size()) target_cache_[slot].valid = false;
    ++state_.steps;

    if (state_.buffer.size() >= batch_size) {
      const auto batch = state_.buffer.sample(batch_size, sample_rng_);
      update_policies(batch);
      loss_sum += update_critic(batch);
      ++m.updates;
    }
    update_targets();
  }
  const double steps = config_.steps_per_episode;
  m.mean_reward /= steps;
  m.mean_u_c /= steps;
  m.mean_u_s /= steps;
  m.critic_loss = m.updates > 0 ? loss_sum / m.updates : 0.0;
  state_.log.push_back(m);
  ++state_.episode;
  return m;
}

const std::vector<EpisodeMetrics>& Trainer::train(
    const std::function<void(const Trainer&, const EpisodeMetrics&)>& on_episode) {
  while (state_.episode < config_.episodes) {
    const EpisodeMetrics m = run_episode();
    if (on_episode) on_episode(*this, m);
  }
  return state_.log;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.grid_width = scenario_.grid.width();
  c.grid_height = scenario_.grid.height();
  c.horizon = scenario_.demand.horizon;
  c.observation_scale = layout_.scale();
  c.episodes = state_.episode;
  c.region_policy = state_.online.region;
  c.adversary_policy = state_.online.adversary;
  c.critic = state_.online.critic;
  return c;
}

}  // namespace rebama
