#include <benchmark/benchmark.h>

#include "hydat/dispatch.hpp"
#include "hydat/hydrology.hpp"
#include "hydat/interdependency.hpp"
#include "hydat/mlp.hpp"
#include "hydat/random.hpp"

using namespace hydat;

static void BM_LagScan(benchmark::State& state) {
  SyntheticCascadeConfig config;
  config.hours = static_cast<std::size_t>(state.range(0));
  const auto c = generate_synthetic_cascade(config);
  const auto up = flow_series(c.upstream), down = flow_series(c.downstream);
  for (auto _ : state) benchmark::DoNotOptimize(lag_scan(up, down, kDefaultMaxLagHours, Season::winter));
}
BENCHMARK(BM_LagScan)->Arg(2000)->Arg(8760);

static void BM_MlpEpoch(benchmark::State& state) {
  Rng rng(1);
  std::vector<std::vector<double>> x, y;
  for (int i = 0; i < state.range(0); ++i) {
    x.push_back({rng.gaussian(0, 1), rng.gaussian(0, 1), rng.gaussian(0, 1)});
    y.push_back({x.back()[0] > 0 ? 1.0 : 0.0});
  }
  SgdConfig sgd;
  sgd.epochs = 1;
  for (auto _ : state) {
    Mlp net({3, 32, 32, 16, 8, 1}, Activation::logistic, 7);
    benchmark::DoNotOptimize(train_sgd(net, x, y, Loss::binary_cross_entropy, sgd));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpEpoch)->Arg(1600);

static void BM_AllocateCategory(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> pmax(static_cast<std::size_t>(state.range(0)));
  double cap = 0;
  for (auto& p : pmax) cap += (p = rng.uniform(50, 900));
  for (auto _ : state) benchmark::DoNotOptimize(allocate_category(0.8 * cap, pmax));
}
BENCHMARK(BM_AllocateCategory)->Arg(3)->Arg(16);
BENCHMARK_MAIN();
