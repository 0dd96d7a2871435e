#include <benchmark/benchmark.h>

#include <random>

#include "rebama/city.hpp"
#include "rebama/game.hpp"
#include "rebama/neural.hpp"
#include "rebama/projection.hpp"
#include "rebama/trainer.hpp"

namespace {

using namespace rebama;

Eigen::VectorXd random_point(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

Scenario city_4x4() {
  Scenario s;
  s.grid = build_grid({4, 4, std::vector<int>(16, 1)});
  s.fleet.vehicles.assign(16, 3);
  s.demand.demand_rate.assign(16, 0.25);
  s.demand.od_matrix.assign(16, std::vector<double>(16, 1.0 / 16));
  return s;
}

void BM_SimplexDykstra(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto poly = SimplexProduct{{n, n}}.polytope();
  const Eigen::VectorXd a = random_point(2 * n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(dykstra_project(a, poly));
}
BENCHMARK(BM_SimplexDykstra)->Arg(3)->Arg(5);

void BM_SimplexClosedForm(benchmark::State& state) {
  const Eigen::VectorXd a = random_point(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(project_simplex(a));
}
BENCHMARK(BM_SimplexClosedForm)->Arg(3)->Arg(5);

void BM_BoxDykstra(benchmark::State& state) {
  const Box box{Eigen::Vector3d(-0.3, -0.2, -0.2), Eigen::Vector3d(0.3, 0.2, 0.2)};
  const auto poly = box.polytope();
  const Eigen::VectorXd a = random_point(3, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dykstra_project(a, poly));
}
BENCHMARK(BM_BoxDykstra);

void BM_MlpForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const auto net = Mlp::initialized(34, 10, Head::softmax(2), 3);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(34, batch);
  const Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(10, batch);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, mask));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForward)->Arg(16)->Arg(600);

void BM_MlpBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const auto net = Mlp::initialized(305, 1, Head::linear(), 4);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(305, batch);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(1, batch);
  Mlp::Cache cache;
  for (auto _ : state) {
    net.forward(x, cache);
    benchmark::DoNotOptimize(net.backward(cache, up));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpBackward)->Arg(600);

void BM_EnvironmentStep(benchmark::State& state) {
  const auto s = city_4x4();
  JointAction stay(16);
  for (int i = 0; i < 16; ++i) {
    const auto slots = static_cast<std::size_t>(s.grid.action_size(i));
    stay[i].p.assign(slots, 0.0);
    stay[i].q.assign(slots, 0.0);
    stay[i].p.back() = stay[i].q.back() = 1.0;
  }
  std::uint64_t t = 0;
  FleetState fleet = initial_state(s.grid, s.fleet, s.demand, 1);
  for (auto _ : state) {
    if (fleet.t >= s.demand.horizon) fleet = initial_state(s.grid, s.fleet, s.demand, 1);
    benchmark::DoNotOptimize(step_environment(fleet, stay, s.grid, s.demand, ++t));
  }
}
BENCHMARK(BM_EnvironmentStep);

void BM_TrainerEpisode(benchmark::State& state) {
  TrainerConfig c;
  c.episodes = 1;
  c.seed = 1;
  Trainer t(city_4x4(), c);
  // Past warmup, so every step runs a policy and a critic update.
  while (t.state().buffer.size() < static_cast<std::size_t>(c.batch_size)) t.run_episode();
  for (auto _ : state) benchmark::DoNotOptimize(t.run_episode());
}
BENCHMARK(BM_TrainerEpisode)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
