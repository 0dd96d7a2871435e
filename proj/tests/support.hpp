#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rebama/city.hpp"
#include "rebama/trainer.hpp"

namespace rebama::testing {

inline DemandScenario uniform_demand(const RegionGrid& grid, double rate, int horizon = 48) {
  const int n = grid.size();
  DemandScenario d;
  d.horizon = horizon;
  d.demand_rate.assign(n, rate);
  d.od_matrix.assign(n, std::vector<double>(n, 1.0 / n));
  return d;
}

inline Scenario make_scenario(int width, int height, int vehicles_per_region, int spots_per_region,
                              double rate, int horizon = 48) {
  Scenario s;
  s.grid = build_grid({width, height, std::vector<int>(width * height, spots_per_region)});
  s.demand = uniform_demand(s.grid, rate, horizon);
  s.fleet.vehicles.assign(s.grid.size(), vehicles_per_region);
  return s;
}

// Every region stays put with all its vehicles.
inline JointAction stay_action(const RegionGrid& grid) {
  JointAction joint(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const int n = grid.action_size(i);
    joint[i].p.assign(n, 0.0);
    joint[i].q.assign(n, 0.0);
    joint[i].p.back() = 1.0;
    joint[i].q.back() = 1.0;
  }
  return joint;
}

inline JointAction uniform_action(const RegionGrid& grid) {
  JointAction joint(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const int n = grid.action_size(i);
    joint[i].p.assign(n, 1.0 / n);
    joint[i].q.assign(n, 1.0 / n);
  }
  return joint;
}

// Random point on each dispatch simplex (normalized exponentials).
inline JointAction random_action(const RegionGrid& grid, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  JointAction joint(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const int n = grid.action_size(i);
    for (auto* row : {&joint[i].p, &joint[i].q}) {
      row->resize(n);
      double sum = 0.0;
      for (auto& x : *row) sum += (x = e(rng));
      for (auto& x : *row) x /= sum;
    }
  }
  return joint;
}

inline int census(const FleetState& s, VehicleStatus status, int region) {
  int c = 0;
  for (const auto& v : s.vehicles) c += (v.status == status && v.region == region) ? 1 : 0;
  return c;
}

}  // namespace rebama::testing
