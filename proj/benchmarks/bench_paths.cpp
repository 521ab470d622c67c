#include <benchmark/benchmark.h>

#include "bsde/paths.hpp"

namespace {

void BM_SimulateBrownian(benchmark::State& state) {
  const bsde::SdeModel model = bsde::make_standard_brownian(0.0, 1.0, 0.0);
  const bsde::TimeGrid grid = bsde::make_grid(1.0, static_cast<int>(state.range(0)), 0.5);
  for (auto _ : state) {
    auto batch = bsde::simulate(model, grid, 4096, 42);
    benchmark::DoNotOptimize(batch.states.data());
  }
  state.SetItemsProcessed(state.iterations() * 4096 * state.range(0));
}
BENCHMARK(BM_SimulateBrownian)->Arg(64)->Arg(256);

void BM_SimulateTanhWithTangents(benchmark::State& state) {
  const bsde::SdeModel model = bsde::make_tanh_model(0.2, 1.0, 0.3, 0.0);
  const bsde::TimeGrid grid = bsde::make_grid(1.0, static_cast<int>(state.range(0)), 0.5);
  for (auto _ : state) {
    auto batch = bsde::simulate(model, grid, 1024, 42);
    benchmark::DoNotOptimize(batch.tangents.data());
  }
  state.SetItemsProcessed(state.iterations() * 1024 * state.range(0));
}
BENCHMARK(BM_SimulateTanhWithTangents)->Arg(64)->Arg(256);

void BM_AnchoredWeights(benchmark::State& state) {
  const bsde::SdeModel model = bsde::make_standard_brownian(0.0, 1.0, 0.0);
  const bsde::TimeGrid grid = bsde::make_grid(1.0, 64, 0.5);
  const bsde::PathBatch batch = bsde::simulate(model, grid, 8192, 7);
  for (auto _ : state) {
    auto set = bsde::malliavin_weights(batch, 0);
    benchmark::DoNotOptimize(set.values.data());
  }
}
BENCHMARK(BM_AnchoredWeights);

}  // namespace
