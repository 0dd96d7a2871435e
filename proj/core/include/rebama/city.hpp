#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace rebama {

// Location record of one grid cell. Longitude/latitude are synthetic: each cell
// spans `kCellDegrees` in both directions starting from the origin.
struct RegionPosition {
  int row = 0;
  int col = 0;
  double longitude = 0.0;
  double latitude = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;
  double lat_min = 0.0;
  double lat_max = 0.0;
};

struct GridConfig {
  int width = 0;
  int height = 0;
  std::vector<int> spots;  // one entry per region, row-major
};

// City partition: a width x height grid with 4-neighborhood adjacency.
//
// Dispatch directions are laid out in fixed slots: the neighbor directions that
// exist on this grid, in the order north, west, east, south, followed by the
// "stay" slot. On a row-major grid that order is ascending region index, so a
// region's action entries (neighbors ascending, self last) are exactly its
// occupied slots in slot order.
class RegionGrid {
 public:
  static constexpr double kCellDegrees = 0.01;
  static constexpr int kAbsent = -1;

  RegionGrid() = default;

  int width() const { return width_; }
  int height() const { return height_; }
  int size() const { return width_ * height_; }
  int index(int row, int col) const { return row * width_ + col; }

  // Neighbors N(i) in ascending region index.
  std::span<const int> neighbors(int region) const { return neighbors_[region]; }
  // n_i = |N(i)| + 1.
  int action_size(int region) const { return static_cast<int>(neighbors_[region].size()) + 1; }
  int max_action_size() const;
  // Destination of each action entry: neighbors ascending, then the region itself.
  std::span<const int> destinations(int region) const { return destinations_[region]; }

  // Neighbor-direction slots present on this grid (2 or 4, or fewer for a 1-wide grid).
  int direction_slots() const { return static_cast<int>(directions_.size()); }
  // direction_slots() + 1; the last slot means "stay".
  int dispatch_slots() const { return direction_slots() + 1; }
  // Neighbor occupying direction slot k of `region`, or kAbsent.
  int slot_neighbor(int region, int slot) const { return slot_neighbors_[region][slot]; }
  // Slot index of each action entry of `region`.
  std::span<const int> entry_slots(int region) const { return entry_slots_[region]; }

  const RegionPosition& position(int region) const { return positions_[region]; }
  int spots(int region) const { return spots_[region]; }
  std::span<const int> spots() const { return spots_; }
  int total_spots() const;

  int manhattan(int a, int b) const;

  friend RegionGrid build_grid(const GridConfig& config);

 private:
  enum class Direction { north, west, east, south };

  int width_ = 0;
  int height_ = 0;
  std::vector<int> spots_;
  std::vector<Direction> directions_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> destinations_;
  std::vector<std::vector<int>> slot_neighbors_;
  std::vector<std::vector<int>> entry_slots_;
  std::vector<RegionPosition> positions_;
};

// Throws ValidationError naming the offending field.
RegionGrid build_grid(const GridConfig& config);

enum class VehicleStatus { vacant, occupied, low_battery, still };

const char* to_string(VehicleStatus status);
// The five legal edges: vacant->occupied, occupied->vacant, vacant->low_battery,
// low_battery->still, still->vacant.
bool is_legal_transition(VehicleStatus from, VehicleStatus to);

struct Vehicle {
  int id = 0;
  VehicleStatus status = VehicleStatus::vacant;
  int region = 0;
  double battery = 1.0;
  int timer = 0;
  int destination = 0;  // meaningful only while occupied

  bool operator==(const Vehicle&) const = default;
};

struct Request {
  int age = 0;  // intervals spent waiting
  bool operator==(const Request&) const = default;
};

// Per-region census derived from the vehicle collection and queues.
struct RegionCounts {
  std::vector<int> vacant;
  std::vector<int> low_battery;
  std::vector<int> still;
  std::vector<int> empty_spots;
  std::vector<int> spots;
  std::vector<int> occupied;
  std::vector<int> demand;

  bool operator==(const RegionCounts&) const = default;
};

struct FleetState {
  std::vector<Vehicle> vehicles;  // sorted by id
  int t = 0;
  std::vector<std::deque<Request>> queues;
  RegionCounts counts;

  bool operator==(const FleetState&) const = default;
};

struct DemandScenario {
  int horizon = 48;
  std::vector<double> demand_rate;             // per region, expected requests per step
  std::vector<std::vector<double>> od_matrix;  // row per origin
  int trip_base = 1;                           // trip steps = trip_base + trip_per_hop * hops
  int trip_per_hop = 1;
  int charge_duration = 4;
  double idle_drain = 0.01;  // per step, vacant and waiting low-battery vehicles
  double trip_drain = 0.02;  // per occupied step
  double low_battery_threshold = 0.2;
  bool drain_on_relocation = true;

  int trip_duration(const RegionGrid& grid, int origin, int destination) const;

  bool operator==(const DemandScenario&) const = default;
};

// Throws ValidationError on a bad scenario (row sums, durations, sizes).
void validate(const DemandScenario& scenario, const RegionGrid& grid);

struct FleetConfig {
  std::vector<int> vehicles;  // initial vacant vehicles per region
  double battery_min = 0.5;
  double battery_max = 1.0;

  int total() const;
  bool operator==(const FleetConfig&) const = default;
};

void validate(const FleetConfig& fleet, const RegionGrid& grid, const DemandScenario& scenario);

// Recomputes `counts` from the vehicles and queues.
void recount(FleetState& state, const RegionGrid& grid);

// Vehicles spread deterministically over [battery_min, battery_max]; demand for
// t = 0 is spawned with `seed`.
FleetState initial_state(const RegionGrid& grid, const FleetConfig& fleet,
                         const DemandScenario& scenario, std::uint64_t seed);

// Appends Poisson(rate_i) new requests to each region queue.
void spawn_demand(FleetState& state, const DemandScenario& scenario, std::uint64_t seed);
void spawn_demand(FleetState& state, const DemandScenario& scenario, std::mt19937_64& rng);

struct ServedCounts {
  int served = 0;
  int unserved = 0;  // still queued after matching
  int seated = 0;    // low-battery vehicles that entered a spot
  int unseated = 0;  // low-battery vehicles left waiting

  bool operator==(const ServedCounts&) const = default;
};

// Local trip and charge assignment within each region.
ServedCounts assign_local(FleetState& state, const RegionGrid& grid,
                          const DemandScenario& scenario, std::mt19937_64& rng);

// Dispatch entry j sends p[j] (vacant) and q[j] (low-battery) to destinations(i)[j].
struct RegionAction {
  std::vector<double> p;
  std::vector<double> q;
};

using JointAction = std::vector<RegionAction>;

inline constexpr double kSimplexTolerance = 1e-6;

// Throws ConstraintViolation if any row leaves its simplex beyond kSimplexTolerance.
void check_joint_action(const JointAction& action, const RegionGrid& grid);

// Integer split of `total` proportional to `weights` (largest remainder, ties to
// the lower index). Sum of the result is exactly `total`.
std::vector<int> largest_remainder(std::span<const double> weights, int total);

struct StepLog {
  int t = 0;  // step index the transition started from
  int served = 0;
  int unserved = 0;  // requests expired this step
  int seated = 0;
  int unseated = 0;
  RegionCounts before;
  RegionCounts after;
};

// One interval: dispatch, battery drain, timers, local assignment, request
// expiry and spawning, recount, t += 1.
StepLog step_environment(FleetState& state, const JointAction& action, const RegionGrid& grid,
                         const DemandScenario& scenario, std::uint64_t seed);

// One CSV row per step: t,served,unserved then V_i, L_i, ST_i, ES_i blocks.
std::string step_log_csv_header(int regions);
std::string to_csv_row(const StepLog& log);

// Seed for step t of an episode seeded with `episode_seed`.
std::uint64_t step_seed(std::uint64_t episode_seed, int t);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace rebama

namespace rebama {

// A complete simulated city: partition, initial fleet and demand model.
struct Scenario {
  RegionGrid grid;
  FleetConfig fleet;
  DemandScenario demand;
};

}  // namespace rebama
