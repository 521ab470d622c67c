#include <benchmark/benchmark.h>

#include "bsde/models.hpp"
#include "bsde/schemes.hpp"

namespace {

void BM_EulerQuad(benchmark::State& state) {
  const bsde::SdeModel model = bsde::make_standard_brownian(0.0, 1.0, 0.0);
  const bsde::Driver zero = bsde::make_zero_driver(1.0);
  const bsde::TerminalCondition call = bsde::make_capped_call(0.0, 2.0);
  const bsde::TimeGrid grid = bsde::make_grid(1.0, static_cast<int>(state.range(0)), 0.9);
  bsde::QuadBackend qb;
  qb.grid_points = 2048;
  for (auto _ : state) {
    auto sol = bsde::euler_scheme(model, zero, call, grid, bsde::Backend{qb});
    benchmark::DoNotOptimize(sol.y_fn.data());
  }
}
BENCHMARK(BM_EulerQuad)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_MalliavinQuad(benchmark::State& state) {
  const bsde::SdeModel model = bsde::make_standard_brownian(0.0, 1.0, 0.0);
  const bsde::Driver affine = bsde::make_affine_driver(0.5, 0.0, 0.0, 1.0);
  const bsde::TerminalCondition call = bsde::make_capped_call(0.0, 2.0);
  const bsde::TimeGrid grid = bsde::make_grid(1.0, static_cast<int>(state.range(0)), 0.5);
  bsde::QuadBackend qb;
  qb.grid_points = 1024;
  for (auto _ : state) {
    auto sol = bsde::malliavin_weights_scheme(model, affine, call, grid, bsde::Backend{qb});
    benchmark::DoNotOptimize(sol.y_fn.data());
  }
}
BENCHMARK(BM_MalliavinQuad)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
