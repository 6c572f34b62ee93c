#include <benchmark/benchmark.h>

#include "mvs/policy.hpp"
#include "mvs/simcheck.hpp"

namespace {

const mvs::MarketCurves& base_market() {
  static const mvs::MarketCurves m = mvs::build_market(mvs::MarketSpec::single_asset(5.0, 2000, 0.05, 0.15, 0.25));
  return m;
}

void BM_SolveSystem(benchmark::State& state) {
  const auto m = mvs::build_market(
      mvs::MarketSpec::single_asset(5.0, static_cast<std::size_t>(state.range(0)), 0.05, 0.15, 0.25));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mvs::solve_system(m, mvs::Preferences{}, mvs::ModelVariant::Full));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveSystem)->RangeMultiplier(4)->Range(500, 8000)->Complexity(benchmark::oN);

void BM_Picard(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(mvs::solve_f_picard(base_market(), mvs::Preferences{}));
}
BENCHMARK(BM_Picard)->Unit(benchmark::kMillisecond);

void BM_SolveAll(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(mvs::solve_all(base_market(), mvs::Preferences{}));
}
BENCHMARK(BM_SolveAll)->Unit(benchmark::kMillisecond);

void BM_MonteCarlo(benchmark::State& state) {
  const auto table = mvs::solve_system(base_market(), mvs::Preferences{}, mvs::ModelVariant::Full);
  const auto law = mvs::wealth_law(table, base_market());
  mvs::SimConfig cfg;
  cfg.num_paths = 10000;
  cfg.workers = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mvs::simulate_equilibrium_wealth(law, cfg));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * cfg.num_paths));
}
BENCHMARK(BM_MonteCarlo)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Philox(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mvs::path_normal_pair(42, i++, 7));
}
BENCHMARK(BM_Philox);

}  // namespace

BENCHMARK_MAIN();
