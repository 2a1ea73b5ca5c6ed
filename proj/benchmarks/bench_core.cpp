#include <benchmark/benchmark.h>

#include "ehdet/battery.hpp"
#include "ehdet/optimizer.hpp"
#include "ehdet/simulator.hpp"

using namespace ehdet;

namespace {

Scenario two_sensor_with_capacity(int K) {
  auto s = load_scenario(std::string(EHDET_SCENARIO_DIR) + "/two_sensor.scn");
  s.network.capacity_K = K;
  return s;
}

void BM_LambdaSearch(benchmark::State& state) {
  const auto s = two_sensor_with_capacity(static_cast<int>(state.range(0)));
  std::vector<BatteryDistribution> psi(s.sensors.size(), BatteryDistribution::full(s.network.capacity_K));
  const OptimizerSettings settings;
  for (auto _ : state) benchmark::DoNotOptimize(lambda_search(psi, s, settings).lambda);
}
BENCHMARK(BM_LambdaSearch)->Arg(20)->Arg(100)->Arg(400);

void BM_BatteryTransition(benchmark::State& state) {
  const auto s = two_sensor_with_capacity(static_cast<int>(state.range(0)));
  const auto kernels = make_chain_kernels(s);
  const auto out = optimize_power_map(s);
  auto psi = out.psi_star[0];
  for (auto _ : state) {
    psi = battery_transition(psi, out.power_map.sensors[0], kernels[0]);
    benchmark::DoNotOptimize(psi.psi.data());
  }
}
BENCHMARK(BM_BatteryTransition)->Arg(20)->Arg(100)->Arg(400);

void BM_OptimizePowerMap(benchmark::State& state) {
  const auto s = two_sensor_with_capacity(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(optimize_power_map(s).objective_j);
}
BENCHMARK(BM_OptimizePowerMap)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_MonteCarloSlots(benchmark::State& state) {
  auto s = two_sensor_with_capacity(100);
  if (state.range(0) == 1) {
    s.network.fc_knowledge = FcKnowledge::map_marginal;
  }
  const auto out = optimize_power_map(s);
  SimulationOptions opt;
  opt.samples = 20000;
  opt.psi = out.psi_star;
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(s, out.power_map, Calibration{}, opt).pd_fc);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(opt.samples));
}
BENCHMARK(BM_MonteCarloSlots)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
