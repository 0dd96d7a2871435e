#include "rebama/city.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rebama/error.hpp"

namespace rebama {

namespace {

void set_status(Vehicle& vehicle, VehicleStatus next) {
  if (!is_legal_transition(vehicle.status, next)) {
    throw std::logic_error(std::string("illegal vehicle transition ") + to_string(vehicle.status) +
                           " -> " + to_string(next));
  }
  vehicle.status = next;
}

void mark_low_battery(FleetState& state, const DemandScenario& scenario) {
  for (auto& v : state.vehicles) {
    if (v.status == VehicleStatus::vacant && v.battery < scenario.low_battery_threshold) {
      set_status(v, VehicleStatus::low_battery);
    }
  }
}

int sample_destination(std::span<const double> row, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] <= 0.0) continue;
    acc += row[j];
    last_positive = static_cast<int>(j);
    if (u < acc) return static_cast<int>(j);
  }
  return last_positive;
}

}  // namespace

int RegionGrid::max_action_size() const {
  int best = 0;
  for (int r = 0; r < size(); ++r) best = std::max(best, action_size(r));
  return best;
}

int RegionGrid::total_spots() const { return std::accumulate(spots_.begin(), spots_.end(), 0); }

int RegionGrid::manhattan(int a, int b) const {
  const auto& pa = positions_[a];
  const auto& pb = positions_[b];
  return std::abs(pa.row - pb.row) + std::abs(pa.col - pb.col);
}

RegionGrid build_grid(const GridConfig& config) {
  if (config.width < 1) throw ValidationError("grid.width must be >= 1");
  if (config.height < 1) throw ValidationError("grid.height must be >= 1");
  const int n = config.width * config.height;
  if (n < 2) throw ValidationError("grid.width * grid.height must be >= 2 regions");
  if (static_cast<int>(config.spots.size()) != n) {
    throw ValidationError("stations.spots must list one entry per region (" + std::to_string(n) +
                          "), got " + std::to_string(config.spots.size()));
  }
  for (int r = 0; r < n; ++r) {
    if (config.spots[r] < 0) {
      throw ValidationError("stations.spots[" + std::to_string(r) + "] is negative");
    }
  }

  RegionGrid grid;
  grid.width_ = config.width;
  grid.height_ = config.height;
  grid.spots_ = config.spots;
  if (grid.total_spots() < 1) throw ValidationError("stations.spots must total at least 1");

  using D = RegionGrid::Direction;
  if (config.height > 1) grid.directions_.push_back(D::north);
  if (config.width > 1) {
    grid.directions_.push_back(D::west);
    grid.directions_.push_back(D::east);
  }
  if (config.height > 1) grid.directions_.push_back(D::south);

  grid.neighbors_.resize(n);
  grid.destinations_.resize(n);
  grid.slot_neighbors_.resize(n);
  grid.entry_slots_.resize(n);
  grid.positions_.resize(n);

  for (int row = 0; row < config.height; ++row) {
    for (int col = 0; col < config.width; ++col) {
      const int r = grid.index(row, col);
      auto& pos = grid.positions_[r];
      pos.row = row;
      pos.col = col;
      pos.lon_min = col * RegionGrid::kCellDegrees;
      pos.lon_max = (col + 1) * RegionGrid::kCellDegrees;
      pos.lat_min = row * RegionGrid::kCellDegrees;
      pos.lat_max = (row + 1) * RegionGrid::kCellDegrees;
      pos.longitude = 0.5 * (pos.lon_min + pos.lon_max);
      pos.latitude = 0.5 * (pos.lat_min + pos.lat_max);

      for (std::size_t k = 0; k < grid.directions_.size(); ++k) {
        int neighbor = RegionGrid::kAbsent;
        switch (grid.directions_[k]) {
          case D::north:
            if (row > 0) neighbor = grid.index(row - 1, col);
            break;
          case D::west:
            if (col > 0) neighbor = grid.index(row, col - 1);
            break;
          case D::east:
            if (col + 1 < config.width) neighbor = grid.index(row, col + 1);
            break;
          case D::south:
            if (row + 1 < config.height) neighbor = grid.index(row + 1, col);
            break;
        }
        grid.slot_neighbors_[r].push_back(neighbor);
        if (neighbor != RegionGrid::kAbsent) {
          grid.neighbors_[r].push_back(neighbor);
          grid.entry_slots_[r].push_back(static_cast<int>(k));
        }
      }
      grid.destinations_[r] = grid.neighbors_[r];
      grid.destinations_[r].push_back(r);
      grid.entry_slots_[r].push_back(grid.direction_slots());
    }
  }
  return grid;
}

const char* to_string(VehicleStatus status) {
  switch (status) {
    case VehicleStatus::vacant:
      return "vacant";
    case VehicleStatus::occupied:
      return "occupied";
    case VehicleStatus::low_battery:
      return "low-battery";
    case VehicleStatus::still:
      return "still";
  }
  return "?";
}

bool is_legal_transition(VehicleStatus from, VehicleStatus to) {
  using S = VehicleStatus;
  return (from == S::vacant && to == S::occupied) || (from == S::occupied && to == S::vacant) ||
         (from == S::vacant && to == S::low_battery) ||
         (from == S::low_battery && to == S::still) || (from == S::still && to == S::vacant);
}

int DemandScenario::trip_duration(const RegionGrid& grid, int origin, int destination) const {
  return trip_base + trip_per_hop * grid.manhattan(origin, destination);
}

void validate(const DemandScenario& scenario, const RegionGrid& grid) {
  const auto n = static_cast<std::size_t>(grid.size());
  if (scenario.horizon < 1) throw ValidationError("demand.horizon must be >= 1");
  if (scenario.demand_rate.size() != n) {
    throw ValidationError("demand.rate must list one entry per region (" + std::to_string(n) +
                          ")");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(scenario.demand_rate[i] >= 0.0) || !std::isfinite(scenario.demand_rate[i])) {
      throw ValidationError("demand.rate[" + std::to_string(i) + "] must be finite and >= 0");
    }
  }
  if (scenario.od_matrix.size() != n) {
    throw ValidationError("demand.od must have one row per region");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = scenario.od_matrix[i];
    if (row.size() != n) {
      throw ValidationError("demand.od." + std::to_string(i) + " must have " + std::to_string(n) +
                            " entries");
    }
    double sum = 0.0;
    for (double x : row) {
      if (!(x >= 0.0)) {
        throw ValidationError("demand.od." + std::to_string(i) + " has a negative entry");
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "demand.od." << i << " sums to " << sum << ", expected 1";
      throw ValidationError(os.str());
    }
  }
  if (scenario.trip_base < 1) throw ValidationError("durations.trip_base must be >= 1");
  if (scenario.trip_per_hop < 0) throw ValidationError("durations.trip_per_hop must be >= 0");
  if (scenario.charge_duration < 1) throw ValidationError("durations.charge must be >= 1");
  if (!(scenario.idle_drain >= 0.0)) throw ValidationError("battery.idle_drain must be >= 0");
  if (!(scenario.trip_drain >= 0.0)) throw ValidationError("battery.trip_drain must be >= 0");
  if (!(scenario.low_battery_threshold > 0.0 && scenario.low_battery_threshold < 1.0)) {
    throw ValidationError("battery.threshold must lie in (0, 1)");
  }
}

int FleetConfig::total() const { return std::accumulate(vehicles.begin(), vehicles.end(), 0); }

void validate(const FleetConfig& fleet, const RegionGrid& grid, const DemandScenario& scenario) {
  if (static_cast<int>(fleet.vehicles.size()) != grid.size()) {
    throw ValidationError("fleet.vehicles must list one entry per region");
  }
  for (std::size_t i = 0; i < fleet.vehicles.size(); ++i) {
    if (fleet.vehicles[i] < 0) {
      throw ValidationError("fleet.vehicles[" + std::to_string(i) + "] is negative");
    }
  }
  if (fleet.total() < 1) throw ValidationError("fleet.vehicles must total at least 1");
  if (!(fleet.battery_min >= scenario.low_battery_threshold)) {
    throw ValidationError("fleet.battery_min must be >= battery.threshold");
  }
  if (!(fleet.battery_max >= fleet.battery_min && fleet.battery_max <= 1.0)) {
    throw ValidationError("fleet.battery_max must lie in [fleet.battery_min, 1]");
  }
}

void recount(FleetState& state, const RegionGrid& grid) {
  const auto n = static_cast<std::size_t>(grid.size());
  auto& c = state.counts;
  c.vacant.assign(n, 0);
  c.low_battery.assign(n, 0);
  c.still.assign(n, 0);
  c.occupied.assign(n, 0);
  c.spots.assign(grid.spots().begin(), grid.spots().end());
  for (const auto& v : state.vehicles) {
    switch (v.status) {
      case VehicleStatus::vacant:
        ++c.vacant[v.region];
        break;
      case VehicleStatus::occupied:
        ++c.occupied[v.region];
        break;
      case VehicleStatus::low_battery:
        ++c.low_battery[v.region];
        break;
      case VehicleStatus::still:
        ++c.still[v.region];
        break;
    }
  }
  c.empty_spots.resize(n);
  c.demand.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.empty_spots[i] = c.spots[i] - c.still[i];
    c.demand[i] = static_cast<int>(state.queues[i].size());
  }
}

FleetState initial_state(const RegionGrid& grid, const FleetConfig& fleet,
                         const DemandScenario& scenario, std::uint64_t seed) {
  validate(scenario, grid);
  validate(fleet, grid, scenario);
  FleetState state;
  state.queues.resize(grid.size());
  const int total = fleet.total();
  int id = 0;
  for (int r = 0; r < grid.size(); ++r) {
    for (int k = 0; k < fleet.vehicles[r]; ++k, ++id) {
      Vehicle v;
      v.id = id;
      v.region = r;
      v.destination = r;
      v.battery = fleet.battery_min +
                  (fleet.battery_max - fleet.battery_min) * (id + 0.5) / static_cast<double>(total);
      state.vehicles.push_back(v);
    }
  }
  spawn_demand(state, scenario, seed);
  recount(state, grid);
  return state;
}

void spawn_demand(FleetState& state, const DemandScenario& scenario, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < scenario.demand_rate.size(); ++i) {
    const double rate = scenario.demand_rate[i];
    if (rate <= 0.0) continue;
    std::poisson_distribution<int> arrivals(rate);
    const int k = arrivals(rng);
    for (int j = 0; j < k; ++j) state.queues[i].push_back(Request{});
  }
}

void spawn_demand(FleetState& state, const DemandScenario& scenario, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  spawn_demand(state, scenario, rng);
}

ServedCounts assign_local(FleetState& state, const RegionGrid& grid,
                          const DemandScenario& scenario, std::mt19937_64& rng) {
  ServedCounts out;
  const int n = grid.size();
  std::vector<int> free_spots(grid.spots().begin(), grid.spots().end());
  for (const auto& v : state.vehicles) {
    if (v.status == VehicleStatus::still) --free_spots[v.region];
  }

  // Vehicles are kept in id order, so a single pass is lowest-id-first per region.
  for (auto& v : state.vehicles) {
    if (v.status != VehicleStatus::vacant) continue;
    auto& queue = state.queues[v.region];
    if (queue.empty()) continue;
    queue.pop_front();
    const int origin = v.region;
    v.destination = sample_destination(scenario.od_matrix[origin], rng);
    v.timer = scenario.trip_duration(grid, origin, v.destination);
    set_status(v, VehicleStatus::occupied);
    ++out.served;
  }
  for (auto& v : state.vehicles) {
    if (v.status != VehicleStatus::low_battery) continue;
    if (free_spots[v.region] > 0) {
      --free_spots[v.region];
      v.timer = scenario.charge_duration;
      set_status(v, VehicleStatus::still);
      ++out.seated;
    } else {
      ++out.unseated;
    }
  }
  for (int i = 0; i < n; ++i) out.unserved += static_cast<int>(state.queues[i].size());
  recount(state, grid);
  return out;
}

void check_joint_action(const JointAction& action, const RegionGrid& grid) {
  if (static_cast<int>(action.size()) != grid.size()) {
    throw ValidationError("joint action has " + std::to_string(action.size()) +
                          " region actions, grid has " + std::to_string(grid.size()));
  }
  auto check_row = [&](int region, const std::vector<double>& row, const char* name) {
    const auto expected = static_cast<std::size_t>(grid.action_size(region));
    if (row.size() != expected) {
      throw ConstraintViolation(region, name,
                                "region " + std::to_string(region) + " row " + name + " has " +
                                    std::to_string(row.size()) + " entries, expected " +
                                    std::to_string(expected));
    }
    double sum = 0.0;
    for (double x : row) {
      if (!std::isfinite(x) || x < -kSimplexTolerance) {
        throw ConstraintViolation(region, name,
                                  "region " + std::to_string(region) + " row " + name +
                                      " has an entry outside [0, 1]");
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      std::ostringstream os;
      os << "region " << region << " row " << name << " sums to " << sum << ", expected 1";
      throw ConstraintViolation(region, name, os.str());
    }
  };
  for (int i = 0; i < grid.size(); ++i) {
    check_row(i, action[i].p, "p");
    check_row(i, action[i].q, "q");
  }
}

std::vector<int> largest_remainder(std::span<const double> weights, int total) {
  std::vector<int> counts(weights.size(), 0);
  if (weights.empty() || total <= 0) return counts;
  double sum = 0.0;
  for (double w : weights) sum += std::max(w, 0.0);
  std::vector<double> remainders(weights.size(), 0.0);
  int assigned = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double share = sum > 0.0 ? std::max(weights[j], 0.0) / sum * total : 0.0;
    counts[j] = static_cast<int>(std::floor(share));
    remainders[j] = share - counts[j];
    assigned += counts[j];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

StepLog step_environment(FleetState& state, const JointAction& action, const RegionGrid& grid,
                         const DemandScenario& scenario, std::uint64_t seed) {
  check_joint_action(action, grid);
  std::mt19937_64 rng(seed);
  const int n = grid.size();

  StepLog log;
  log.t = state.t;
  recount(state, grid);
  log.before = state.counts;

  // Dispatch: who moves is decided from the pre-dispatch positions.
  std::vector<std::vector<std::size_t>> vacant(n), low(n);
  for (std::size_t k = 0; k < state.vehicles.size(); ++k) {
    const auto& v = state.vehicles[k];
    if (v.status == VehicleStatus::vacant) vacant[v.region].push_back(k);
    if (v.status == VehicleStatus::low_battery) low[v.region].push_back(k);
  }
  std::vector<char> relocated(state.vehicles.size(), 0);
  auto dispatch = [&](int region, const std::vector<std::size_t>& members,
                      const std::vector<double>& fractions) {
    const auto counts = largest_remainder(fractions, static_cast<int>(members.size()));
    const auto dest = grid.destinations(region);
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      for (int c = 0; c < counts[j]; ++c, ++cursor) {
        auto& v = state.vehicles[members[cursor]];
        if (dest[j] != region) {
          v.region = dest[j];
          relocated[members[cursor]] = 1;
        }
      }
    }
  };
  for (int i = 0; i < n; ++i) {
    dispatch(i, vacant[i], action[i].p);
    dispatch(i, low[i], action[i].q);
  }

  for (std::size_t k = 0; k < state.vehicles.size(); ++k) {
    auto& v = state.vehicles[k];
    switch (v.status) {
      case VehicleStatus::vacant:
      case VehicleStatus::low_battery:
        if (!relocated[k] || scenario.drain_on_relocation) v.battery -= scenario.idle_drain;
        break;
      case VehicleStatus::occupied:
        v.battery -= scenario.trip_drain;
        break;
      case VehicleStatus::still:
        break;
    }
    v.battery = std::clamp(v.battery, 0.0, 1.0);
  }
  mark_low_battery(state, scenario);

  for (auto& v : state.vehicles) {
    if (v.status == VehicleStatus::occupied) {
      if (--v.timer <= 0) {
        v.timer = 0;
        v.region = v.destination;
        set_status(v, VehicleStatus::vacant);
      }
    } else if (v.status == VehicleStatus::still) {
      if (--v.timer <= 0) {
        v.timer = 0;
        v.battery = 1.0;
        set_status(v, VehicleStatus::vacant);
      }
    }
  }
  mark_low_battery(state, scenario);

  const ServedCounts served = assign_local(state, grid, scenario, rng);
  log.served = served.served;
  log.seated = served.seated;
  log.unseated = served.unseated;

  for (auto& queue : state.queues) {
    while (!queue.empty() && queue.front().age >= 1) {
      queue.pop_front();
      ++log.unserved;
    }
    for (auto& request : queue) ++request.age;
  }
  spawn_demand(state, scenario, rng);

  recount(state, grid);
  ++state.t;
  log.after = state.counts;
  return log;
}

std::string step_log_csv_header(int regions) {
  std::ostringstream os;
  os << "t,served,unserved";
  for (const char* prefix : {"V", "L", "ST", "ES"}) {
    for (int i = 0; i < regions; ++i) os << ',' << prefix << '_' << i;
  }
  return os.str();
}

std::string to_csv_row(const StepLog& log) {
  std::ostringstream os;
  os << log.t << ',' << log.served << ',' << log.unserved;
  for (const auto* field : {&log.after.vacant, &log.after.low_battery, &log.after.still,
                            &log.after.empty_spots}) {
    for (int x : *field) os << ',' << x;
  }
  return os.str();
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t step_seed(std::uint64_t episode_seed, int t) {
  return mix_seed(episode_seed, static_cast<std::uint64_t>(t) + 1);
}

}  // namespace rebama
