#include "rebama/game.hpp"

#include <algorithm>
#include <cmath>

#include "rebama/error.hpp"

namespace rebama {

std::vector<LocalState> local_states(const FleetState& state) {
  const auto& c = state.counts;
  std::vector<LocalState> out(c.vacant.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].vacant = c.vacant[i];
    out[i].low_battery = c.low_battery[i];
    out[i].demand = c.demand[i];
    out[i].still = c.still[i];
    out[i].empty_spots = c.empty_spots[i];
    out[i].spots = c.spots[i];
  }
  return out;
}

bool AdversaryBox::contains(const AdversaryAction& a, double tol) const {
  const std::array<double, 3> v{a.demand, a.charge, a.vacant};
  for (int k = 0; k < 3; ++k) {
    if (v[k] < lower[k] - tol || v[k] > upper[k] + tol) return false;
  }
  return true;
}

void validate(const AdversaryBox& box) {
  static constexpr const char* kNames[] = {"demand", "charge", "vacant"};
  for (int k = 0; k < 3; ++k) {
    if (!std::isfinite(box.lower[k]) || !std::isfinite(box.upper[k]) ||
        box.lower[k] > box.upper[k]) {
      throw ValidationError(std::string("adversary.") + kNames[k] +
                            "_lower must not exceed adversary." + kNames[k] + "_upper");
    }
  }
}

LocalState perturb_state(const LocalState& s, const AdversaryAction& a, EmptySpotRule rule) {
  const double charging = s.spots - s.empty_spots;
  LocalState out = s;
  out.vacant = s.vacant + charging * a.charge + s.vacant * a.vacant;
  out.demand = s.demand * (1.0 + a.demand);
  out.still = s.still - charging * a.charge;
  const bool has_room = out.still < s.spots;
  const double base = rule == EmptySpotRule::as_printed ? s.spots - s.still : s.spots - out.still;
  out.empty_spots = has_room ? base : 0.0;
  out.perturbed = true;
  return out;
}

Fairness compute_fairness(std::span<const LocalState> states) {
  Fairness f;
  const double cap = static_cast<double>(states.size());

  double empty_total = 0.0;
  double still_total = 0.0;
  for (const auto& s : states) {
    if (s.still == 0.0) continue;
    empty_total += s.empty_spots;
    still_total += s.still;
  }
  if (still_total > 0.0) {
    const double global = empty_total / still_total;
    for (const auto& s : states) {
      if (s.still == 0.0) continue;
      f.charging -= std::abs(s.empty_spots / s.still - global);
    }
  }

  double demand_total = 0.0;
  double vacant_total = 0.0;
  for (const auto& s : states) {
    demand_total += s.demand;
    vacant_total += s.vacant;
  }
  const double global =
      vacant_total > 0.0 ? demand_total / vacant_total : (demand_total > 0.0 ? cap : 0.0);
  for (const auto& s : states) {
    double local;
    if (s.vacant != 0.0) {
      local = s.demand / s.vacant;
    } else if (s.demand > 0.0) {
      local = cap;
    } else {
      continue;
    }
    f.supply -= std::abs(local - global);
  }
  return f;
}

double compute_reward(std::span<const LocalState> states, double beta) {
  return reward_from(compute_fairness(states), beta);
}

ObservationLayout::ObservationLayout(const RegionGrid& grid, int horizon, double scale)
    : slots_(grid.direction_slots()), horizon_(horizon), scale_(scale) {
  if (horizon < 1) throw ValidationError("observation horizon must be >= 1");
  if (!(scale > 0.0)) throw ValidationError("observation scale must be > 0");
}

double default_observation_scale(const RegionGrid& grid, int fleet_size) {
  return std::max(1.0, static_cast<double>(fleet_size) / grid.size());
}

namespace {

void write_local(Eigen::Ref<Eigen::VectorXd> dst, const LocalState& s, double scale) {
  const auto f = s.fields();
  for (int k = 0; k < LocalState::kFields; ++k) dst[k] = f[k] / scale;
}

}  // namespace

Eigen::MatrixXd observe(std::span<const LocalState> states, std::span<const LocalState> own, int t,
                        const RegionGrid& grid, const ObservationLayout& layout) {
  const int n = grid.size();
  const int f = LocalState::kFields;
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(layout.dimension(), n);
  const double rows = std::max(1, grid.height() - 1);
  const double cols = std::max(1, grid.width() - 1);
  for (int i = 0; i < n; ++i) {
    auto col = obs.col(i);
    write_local(col.segment(0, f), own[i], layout.scale());
    for (int k = 0; k < layout.neighbor_slots(); ++k) {
      const int j = grid.slot_neighbor(i, k);
      if (j != RegionGrid::kAbsent) write_local(col.segment(f * (k + 1), f), states[j], layout.scale());
    }
    const int base = layout.local_features();
    col[base] = static_cast<double>(t) / layout.horizon();
    const auto& pos = grid.position(i);
    col[base + 1] = pos.row / rows;
    col[base + 2] = pos.col / cols;
    col[base + 3] = static_cast<double>(i) / (n - 1);
  }
  return obs;
}

Observations build_observations(std::span<const LocalState> states, int t,
                                std::span<const AdversaryAction> adversary,
                                const RegionGrid& grid, const ObservationLayout& layout,
                                EmptySpotRule rule) {
  if (static_cast<int>(states.size()) != grid.size() ||
      static_cast<int>(adversary.size()) != grid.size()) {
    throw ValidationError("build_observations needs one state and one adversary action per region");
  }
  std::vector<LocalState> perturbed(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    perturbed[i] = perturb_state(states[i], adversary[i], rule);
  }
  Observations out;
  out.adversary = observe(states, states, t, grid, layout);
  out.region = observe(states, perturbed, t, grid, layout);
  return out;
}

Eigen::VectorXd state_features(std::span<const LocalState> states, int t,
                               const ObservationLayout& layout) {
  const int n = static_cast<int>(states.size());
  Eigen::VectorXd x(layout.state_dimension(n));
  for (int i = 0; i < n; ++i) {
    write_local(x.segment(LocalState::kFields * i, LocalState::kFields), states[i], layout.scale());
  }
  x[x.size() - 1] = static_cast<double>(t) / layout.horizon();
  return x;
}

int padded_action_size(const RegionGrid& grid) { return 2 * grid.dispatch_slots(); }

Eigen::VectorXd pad_action(const RegionAction& action, const RegionGrid& grid, int region) {
  const int slots = grid.dispatch_slots();
  const auto entries = grid.entry_slots(region);
  if (action.p.size() != entries.size() || action.q.size() != entries.size()) {
    throw ValidationError("region action size does not match region " + std::to_string(region));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * slots);
  for (std::size_t j = 0; j < entries.size(); ++j) {
    out[entries[j]] = action.p[j];
    out[slots + entries[j]] = action.q[j];
  }
  return out;
}

RegionAction unpad_action(const Eigen::Ref<const Eigen::VectorXd>& padded, const RegionGrid& grid,
                          int region) {
  const int slots = grid.dispatch_slots();
  const auto entries = grid.entry_slots(region);
  RegionAction a;
  a.p.resize(entries.size());
  a.q.resize(entries.size());
  for (std::size_t j = 0; j < entries.size(); ++j) {
    a.p[j] = padded[entries[j]];
    a.q[j] = padded[slots + entries[j]];
  }
  return a;
}

Eigen::VectorXd action_mask(const RegionGrid& grid, int region) {
  const int slots = grid.dispatch_slots();
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(2 * slots);
  for (int s : grid.entry_slots(region)) {
    mask[s] = 1.0;
    mask[slots + s] = 1.0;
  }
  return mask;
}

Eigen::MatrixXd action_masks(const RegionGrid& grid) {
  Eigen::MatrixXd masks(padded_action_size(grid), grid.size());
  for (int i = 0; i < grid.size(); ++i) masks.col(i) = action_mask(grid, i);
  return masks;
}

Eigen::Vector3d to_vector(const AdversaryAction& a) { return {a.demand, a.charge, a.vacant}; }

AdversaryAction to_adversary_action(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return {v[0], v[1], v[2]};
}

}  // namespace rebama
