#include <benchmark/benchmark.h>

#include "lanedrop/prob.hpp"
#include "lanedrop/sim.hpp"

namespace {

const lanedrop::prob::LookupTable& bench_table() {
  static const lanedrop::prob::LookupTable table = [] {
    lanedrop::prob::GridSpec g;
    g.axes[lanedrop::prob::kDvRel] = {-2.0, -0.5, 0.0, 0.5, 1.0};
    g.axes[lanedrop::prob::kMu] = {-6.0, -4.0, -2.5, -1.0, 0.5};
    g.axes[lanedrop::prob::kSigma] = {0.05, 0.5, 1.0, 1.5};
    g.axes[lanedrop::prob::kGap] = {0.0, 0.05, 0.15, 0.4, 1.1};
    g.axes[lanedrop::prob::kTime] = {0.0, 0.5, 1.0};
    return lanedrop::prob::build_lookup_table(g, 2000, 5);
  }();
  return table;
}

void BM_McBaseCase(benchmark::State& state) {
  const lanedrop::prob::NormalizedBaseQuery q{0.2, -2.0, 0.5, 0.08, 0.05};
  const auto samples = static_cast<std::uint64_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lanedrop::prob::mc_base_case(q, samples, seed++));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(samples));
}
BENCHMARK(BM_McBaseCase)->Arg(1000)->Arg(10000);

void BM_InterpF2(benchmark::State& state) {
  const auto& table = bench_table();
  const lanedrop::prob::NormalizedBaseQuery q{0.12, -3.1, 0.72, 0.06, 0.11};
  for (auto _ : state) {
    benchmark::DoNotOptimize(lanedrop::prob::interp_f2(table, q));
  }
}
BENCHMARK(BM_InterpF2);

void BM_EstimateThreeLanes(benchmark::State& state) {
  const auto& table = bench_table();
  const lanedrop::prob::CorridorQuery q{
      900.0, 30.0,
      {lanedrop::prob::LaneParams{26.0, 3.2, 0.7, 42.6, 3.0},
       lanedrop::prob::LaneParams{24.0, 3.0, 0.6, 39.4, 3.0}}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(lanedrop::prob::estimate(q, table));
  }
}
BENCHMARK(BM_EstimateThreeLanes);

void BM_SimStepCongested(benchmark::State& state) {
  lanedrop::sim::SimConfig cfg;
  cfg.q_peak_vph = 4800.0;
  cfg.q_offpeak_vph = 4800.0;
  cfg.peak_start_s = 0.0;
  cfg.peak_end_s = 9000.0;
  cfg.seed = 11;
  lanedrop::sim::World world(lanedrop::sim::Corridor::i81(), cfg);
  // fill the corridor before measuring
  while (world.time() < 600.0) world.step();
  for (auto _ : state) {
    world.step();
  }
  state.counters["vehicles"] = static_cast<double>(world.active_count());
}
BENCHMARK(BM_SimStepCongested);

}  // namespace

BENCHMARK_MAIN();
