#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rebama/city.hpp"

namespace rebama {

// Local view of one region: (V, L, d, ST, ES, SP). Real-valued because the
// adversary's perturbation produces fractional counts.
struct LocalState {
  static constexpr int kFields = 6;

  double vacant = 0.0;
  double low_battery = 0.0;
  double demand = 0.0;
  double still = 0.0;
  double empty_spots = 0.0;
  double spots = 0.0;
  bool perturbed = false;

  std::array<double, kFields> fields() const {
    return {vacant, low_battery, demand, still, empty_spots, spots};
  }
  bool operator==(const LocalState&) const = default;
};

// True local states read off the simulator census. Demand is the pending queue.
std::vector<LocalState> local_states(const FleetState& state);

// (delta_d, delta_c, delta_v): relative volatility of demand, of the occupied
// charging capacity, and of vacant vehicles.
struct AdversaryAction {
  double demand = 0.0;
  double charge = 0.0;
  double vacant = 0.0;

  static constexpr int kSize = 3;
  bool operator==(const AdversaryAction&) const = default;
};

struct AdversaryBox {
  std::array<double, 3> lower{-0.3, -0.2, -0.2};
  std::array<double, 3> upper{0.3, 0.2, 0.2};

  bool contains(const AdversaryAction& a, double tol = 0.0) const;
  bool operator==(const AdversaryBox&) const = default;
};

// Throws ValidationError when lower > upper anywhere.
void validate(const AdversaryBox& box);

// How the perturbed empty-spot count is formed. `as_printed` keeps the
// unperturbed (SP - ST) value gated by the perturbed still count; the
// alternative uses SP - perturbed ST.
enum class EmptySpotRule { as_printed, perturbed_still };

LocalState perturb_state(const LocalState& s, const AdversaryAction& a,
                         EmptySpotRule rule = EmptySpotRule::as_printed);

struct Fairness {
  double charging = 0.0;  // u_c
  double supply = 0.0;    // u_s
};

// Both terms are <= 0. Regions with ST = 0 drop out of the charging term and its
// global ratio. A region with V = 0 and d > 0 uses the capped ratio N; V = d = 0
// has no defined ratio and is skipped.
Fairness compute_fairness(std::span<const LocalState> states);

inline double reward_from(const Fairness& f, double beta) { return f.charging + beta * f.supply; }

// r = u_c + beta * u_s on true post-transition states. The adversaries receive -r.
double compute_reward(std::span<const LocalState> states, double beta);

// Flattened observation layout, per region:
//   [own local state | neighbor local state per direction slot | t / horizon | row, col, index]
// Local fields are divided by `scale`. Direction slots follow RegionGrid: the
// neighbors present on the grid in ascending region index; a missing neighbor
// leaves its slot zero.
class ObservationLayout {
 public:
  ObservationLayout() = default;
  ObservationLayout(const RegionGrid& grid, int horizon, double scale);

  int dimension() const { return local_features() + 1 + kPositionFeatures; }
  // Leading features that carry local-state counts (noise is injected here).
  int local_features() const { return LocalState::kFields * (1 + slots_); }
  int neighbor_slots() const { return slots_; }
  int horizon() const { return horizon_; }
  double scale() const { return scale_; }
  // Centralized critic state features: every region's normalized local state, then t.
  int state_dimension(int regions) const { return LocalState::kFields * regions + 1; }

  static constexpr int kPositionFeatures = 3;

 private:
  int slots_ = 0;
  int horizon_ = 1;
  double scale_ = 1.0;
};

// Normalizer used when no explicit scale is given: fleet size per region, >= 1.
double default_observation_scale(const RegionGrid& grid, int fleet_size);

struct Observations {
  Eigen::MatrixXd adversary;  // dimension x N, built from true states
  Eigen::MatrixXd region;     // dimension x N, own state perturbed
};

// Observation of every region, own block taken from `own` and neighbor blocks from `states`.
Eigen::MatrixXd observe(std::span<const LocalState> states, std::span<const LocalState> own, int t,
                        const RegionGrid& grid, const ObservationLayout& layout);

Observations build_observations(std::span<const LocalState> states, int t,
                                std::span<const AdversaryAction> adversary,
                                const RegionGrid& grid, const ObservationLayout& layout,
                                EmptySpotRule rule = EmptySpotRule::as_printed);

Eigen::VectorXd state_features(std::span<const LocalState> states, int t,
                               const ObservationLayout& layout);

// Region actions in network form: two blocks (p then q) of dispatch_slots()
// entries each; slots absent for a region hold zero.
int padded_action_size(const RegionGrid& grid);
Eigen::VectorXd pad_action(const RegionAction& action, const RegionGrid& grid, int region);
RegionAction unpad_action(const Eigen::Ref<const Eigen::VectorXd>& padded, const RegionGrid& grid,
                          int region);
// 1 where the slot exists for `region`, 0 otherwise.
Eigen::VectorXd action_mask(const RegionGrid& grid, int region);
Eigen::MatrixXd action_masks(const RegionGrid& grid);

Eigen::Vector3d to_vector(const AdversaryAction& a);
AdversaryAction to_adversary_action(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace rebama
