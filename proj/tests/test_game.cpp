#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "rebama/error.hpp"
#include "rebama/game.hpp"
#include "support.hpp"

namespace rebama {
namespace {

LocalState make_state(double v, double l, double d, double st, double es, double sp) {
  LocalState s;
  s.vacant = v;
  s.low_battery = l;
  s.demand = d;
  s.still = st;
  s.empty_spots = es;
  s.spots = sp;
  return s;
}

LocalState random_true_state(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 12), spots(0, 6);
  const int sp = spots(rng);
  const int st = std::uniform_int_distribution<int>(0, sp)(rng);
  return make_state(count(rng), count(rng), count(rng), st, sp - st, sp);
}

TEST(Perturb, HandCase) {
  const auto s = make_state(10, 2, 4, 3, 2, 5);
  const auto p = perturb_state(s, {0.25, 0.5, 0.1});
  EXPECT_EQ(p.vacant, 12.5);
  EXPECT_EQ(p.low_battery, 2.0);
  EXPECT_EQ(p.demand, 5.0);
  EXPECT_EQ(p.still, 1.5);
  EXPECT_EQ(p.empty_spots, 2.0);
  EXPECT_EQ(p.spots, 5.0);
  EXPECT_TRUE(p.perturbed);
}

TEST(Perturb, AlternativeEmptySpotRuleUsesPerturbedStill) {
  const auto s = make_state(10, 2, 4, 3, 2, 5);
  const auto p = perturb_state(s, {0.25, 0.5, 0.1}, EmptySpotRule::perturbed_still);
  EXPECT_EQ(p.empty_spots, 3.5);
}

TEST(Perturb, FullStationStaysFull) {
  const auto s = make_state(1, 0, 1, 4, 0, 4);
  const auto p = perturb_state(s, {0.1, -0.0, 0.2});
  EXPECT_EQ(p.empty_spots, 0.0);
  EXPECT_EQ(p.still, 4.0);
}

TEST(Perturb, ZeroActionIsIdentityOnTrueStates) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10000; ++k) {
    const auto s = random_true_state(rng);
    for (auto rule : {EmptySpotRule::as_printed, EmptySpotRule::perturbed_still}) {
      const auto p = perturb_state(s, {}, rule);
      ASSERT_EQ(p.fields(), s.fields());
    }
  }
}

// Demand is linear in delta_d, vacant affine in (delta_c, delta_v) with slopes (SP - ES, V).
TEST(Perturb, SlopesMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int k = 0; k < 200; ++k) {
    const auto s = random_true_state(rng);
    const AdversaryAction a{u(rng), u(rng), u(rng)};
    const double h = 1e-3;
    auto at = [&](AdversaryAction x) { return perturb_state(s, x); };
    AdversaryAction ad = a, ac = a, av = a;
    ad.demand += h;
    ac.charge += h;
    av.vacant += h;
    EXPECT_NEAR((at(ad).demand - at(a).demand) / h, s.demand, 1e-9);
    EXPECT_NEAR((at(ac).vacant - at(a).vacant) / h, s.spots - s.empty_spots, 1e-9);
    EXPECT_NEAR((at(av).vacant - at(a).vacant) / h, s.vacant, 1e-9);
  }
}

TEST(Fairness, HandCases) {
  std::vector<LocalState> c{make_state(1, 0, 1, 2, 1, 3), make_state(1, 0, 1, 2, 3, 5)};
  EXPECT_NEAR(compute_fairness(c).charging, -1.0, 1e-12);
  std::vector<LocalState> s{make_state(1, 0, 3, 1, 1, 2), make_state(1, 0, 1, 1, 1, 2)};
  EXPECT_NEAR(compute_fairness(s).supply, -2.0, 1e-12);
}

TEST(Fairness, PerfectlyFairIsZero) {
  std::vector<LocalState> s{make_state(2, 0, 4, 1, 2, 3), make_state(3, 1, 6, 2, 4, 6),
                            make_state(1, 0, 2, 3, 6, 9)};
  const auto f = compute_fairness(s);
  EXPECT_EQ(f.charging, 0.0);
  EXPECT_EQ(f.supply, 0.0);
  EXPECT_EQ(compute_reward(s, 1.0), 0.0);
}

TEST(Fairness, DegenerateDenominators) {
  // ST = 0 drops out of the charging term entirely.
  std::vector<LocalState> s{make_state(1, 0, 1, 0, 2, 2), make_state(1, 0, 1, 2, 1, 3)};
  EXPECT_EQ(compute_fairness(s).charging, 0.0);
  // V = 0 with demand uses the capped ratio N = 2; global = 2 / 1.
  std::vector<LocalState> starved{make_state(0, 0, 1, 0, 1, 1), make_state(1, 0, 1, 0, 1, 1)};
  EXPECT_NEAR(compute_fairness(starved).supply, -(0.0 + 1.0), 1e-12);
  // V = d = 0 is skipped.
  std::vector<LocalState> idle{make_state(0, 0, 0, 0, 1, 1), make_state(2, 0, 2, 0, 1, 1)};
  EXPECT_EQ(compute_fairness(idle).supply, 0.0);
  std::vector<LocalState> empty(3);
  const auto f = compute_fairness(empty);
  EXPECT_EQ(f.charging, 0.0);
  EXPECT_EQ(f.supply, 0.0);
}

// Straight evaluation of the definition with the same zero-denominator rules.
double supply_oracle(const std::vector<LocalState>& s) {
  const double cap = static_cast<double>(s.size());
  double d = 0, v = 0;
  for (const auto& x : s) {
    d += x.demand;
    v += x.vacant;
  }
  const double g = v > 0 ? d / v : (d > 0 ? cap : 0.0);
  double sum = 0;
  for (const auto& x : s) {
    if (x.vacant > 0) sum += std::abs(x.demand / x.vacant - g);
    else if (x.demand > 0) sum += std::abs(cap - g);
  }
  return -sum;
}

double charging_oracle(const std::vector<LocalState>& s) {
  double e = 0, st = 0;
  for (const auto& x : s) {
    if (x.still > 0) {
      e += x.empty_spots;
      st += x.still;
    }
  }
  double sum = 0;
  for (const auto& x : s) {
    if (x.still > 0) sum += std::abs(x.empty_spots / x.still - e / st);
  }
  return -sum;
}

TEST(Fairness, NonPositiveAndZeroOnlyWhenRatiosAgree) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> regions(1, 8);
  for (int k = 0; k < 10000; ++k) {
    std::vector<LocalState> s(regions(rng));
    for (auto& x : s) x = random_true_state(rng);
    const auto f = compute_fairness(s);
    ASSERT_LE(f.charging, 0.0);
    ASSERT_LE(f.supply, 0.0);
    EXPECT_NEAR(f.charging, charging_oracle(s), 1e-9);
    EXPECT_NEAR(f.supply, supply_oracle(s), 1e-9);
    EXPECT_EQ(f.supply == 0.0, supply_oracle(s) == 0.0);
  }
  // Scaling every region's counts by its own factor keeps each ratio, so
  // the metrics stay at zero.
  for (int k = 0; k < 1000; ++k) {
    std::vector<LocalState> s(regions(rng));
    std::uniform_int_distribution<int> factor(1, 5);
    for (auto& x : s) {
      const double m = factor(rng);
      x = make_state(2 * m, 0, 3 * m, m, 2 * m, 3 * m);
    }
    const auto f = compute_fairness(s);
    EXPECT_EQ(f.charging, 0.0);
    EXPECT_EQ(f.supply, 0.0);
  }
}

TEST(Reward, WeightedSum) {
  EXPECT_EQ(reward_from({-1.0, -0.5}, 2.0), -2.0);
  EXPECT_EQ(reward_from({-1.0, -0.5}, 0.0), -1.0);
  std::vector<LocalState> c{make_state(1, 0, 3, 2, 1, 3), make_state(1, 0, 1, 2, 3, 5)};
  EXPECT_NEAR(compute_reward(c, 0.0), -1.0, 1e-12);
  EXPECT_NEAR(compute_reward(c, 1.0), -3.0, 1e-12);
}

TEST(Box, Validation) {
  AdversaryBox box;
  EXPECT_NO_THROW(validate(box));
  EXPECT_TRUE(box.contains({0.3, -0.2, 0.0}));
  EXPECT_FALSE(box.contains({0.31, 0.0, 0.0}));
  box.lower[1] = 0.5;
  EXPECT_THROW(validate(box), ValidationError);
}

class ObservationTest : public ::testing::Test {
 protected:
  RegionGrid grid = build_grid({4, 4, std::vector<int>(16, 1)});
  ObservationLayout layout{grid, 48, 2.0};
  std::vector<LocalState> states;

  void SetUp() override {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 16; ++i) states.push_back(random_true_state(rng));
  }
};

TEST_F(ObservationTest, LayoutDimension) {
  EXPECT_EQ(layout.neighbor_slots(), 4);
  EXPECT_EQ(layout.local_features(), 30);
  EXPECT_EQ(layout.dimension(), 34);
  EXPECT_EQ(layout.state_dimension(16), 97);
  EXPECT_EQ(padded_action_size(grid), 10);
}

TEST_F(ObservationTest, ZeroPerturbationAgreesOnLocalFields) {
  const std::vector<AdversaryAction> zero(16);
  const auto obs = build_observations(states, 7, zero, grid, layout);
  EXPECT_EQ(obs.region, obs.adversary);
}

TEST_F(ObservationTest, CornerHasTwoZeroSlots) {
  const auto obs = observe(states, states, 0, grid, layout);
  int zero_slots = 0;
  for (int k = 0; k < 4; ++k) {
    if (grid.slot_neighbor(0, k) == RegionGrid::kAbsent) {
      ++zero_slots;
      EXPECT_TRUE(obs.col(0).segment(6 * (k + 1), 6).isZero());
    }
  }
  EXPECT_EQ(zero_slots, 2);
}

TEST_F(ObservationTest, NeighborBlocksStayTrue) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  std::vector<AdversaryAction> adv(16);
  for (auto& a : adv) a = {u(rng), u(rng), u(rng)};
  const auto obs = build_observations(states, 3, adv, grid, layout);
  for (int i = 0; i < 16; ++i) {
    const auto p = perturb_state(states[i], adv[i]).fields();
    for (int f = 0; f < 6; ++f) EXPECT_EQ(obs.region(f, i), p[f] / 2.0);
    for (int k = 0; k < 4; ++k) {
      const int j = grid.slot_neighbor(i, k);
      if (j == RegionGrid::kAbsent) continue;
      const auto truth = states[j].fields();
      for (int f = 0; f < 6; ++f) {
        EXPECT_EQ(obs.region(6 * (k + 1) + f, i), truth[f] / 2.0);
        EXPECT_EQ(obs.adversary(6 * (k + 1) + f, i), truth[f] / 2.0);
      }
    }
    EXPECT_EQ(obs.region(30, i), 3.0 / 48.0);
  }
}

// Mirroring the grid left-right relabels regions; the own block and the
// multiset of neighbor blocks follow the relabeling.
TEST_F(ObservationTest, StableUnderRelabeling) {
  auto mirror = [&](int i) { return grid.index(i / 4, 3 - i % 4); };
  std::vector<LocalState> mirrored(16);
  for (int i = 0; i < 16; ++i) mirrored[mirror(i)] = states[i];
  const auto a = observe(states, states, 5, grid, layout);
  const auto b = observe(mirrored, mirrored, 5, grid, layout);
  for (int i = 0; i < 16; ++i) {
    const int m = mirror(i);
    EXPECT_EQ(a.col(i).head(6), b.col(m).head(6));
    std::vector<std::vector<double>> na, nb;
    for (int k = 0; k < 4; ++k) {
      const Eigen::VectorXd x = a.col(i).segment(6 * (k + 1), 6);
      const Eigen::VectorXd y = b.col(m).segment(6 * (k + 1), 6);
      na.emplace_back(x.data(), x.data() + 6);
      nb.emplace_back(y.data(), y.data() + 6);
    }
    std::sort(na.begin(), na.end());
    std::sort(nb.begin(), nb.end());
    EXPECT_EQ(na, nb);
  }
}

TEST(Padding, RoundTripsAndMasks) {
  const auto grid = build_grid({4, 4, std::vector<int>(16, 1)});
  std::mt19937_64 rng(2);
  const auto joint = testing::random_action(grid, rng);
  for (int i = 0; i < 16; ++i) {
    const Eigen::VectorXd padded = pad_action(joint[i], grid, i);
    const Eigen::VectorXd mask = action_mask(grid, i);
    EXPECT_EQ(mask.sum(), 2 * grid.action_size(i));
    EXPECT_TRUE((padded.array() * (1.0 - mask.array())).isZero(0.0));
    const auto back = unpad_action(padded, grid, i);
    EXPECT_EQ(back.p, joint[i].p);
    EXPECT_EQ(back.q, joint[i].q);
    // Stay is always the last slot of each block.
    EXPECT_EQ(padded[4], joint[i].p.back());
    EXPECT_EQ(padded[9], joint[i].q.back());
  }
}

}  // namespace
}  // namespace rebama
