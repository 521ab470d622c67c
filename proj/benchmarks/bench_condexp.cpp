#include <benchmark/benchmark.h>

#include <cmath>

#include "bsde/condexp.hpp"

namespace {

void BM_GaussHermiteProjection(benchmark::State& state) {
  const bsde::QuadratureRule& rule =
      bsde::QuadratureRule::gauss_hermite(static_cast<int>(state.range(0)));
  const bsde::GaussianTransition tr{0.0, 0.3, 0.3};
  const bsde::StateFunction g =
      bsde::tabulate_spline([](double x) { return std::tanh(x); }, -8.0, 8.0, 4096);
  double x = -2.0;
  for (auto _ : state) {
    double acc = bsde::quad_expect(rule, tr, [&g](double v) { return g(v); }, x, false);
    benchmark::DoNotOptimize(acc);
    x = (x > 2.0) ? -2.0 : x + 1e-4;
  }
}
BENCHMARK(BM_GaussHermiteProjection)->Arg(8)->Arg(16)->Arg(64);

void BM_SplineTabulation(benchmark::State& state) {
  for (auto _ : state) {
    auto s = bsde::tabulate_spline([](double x) { return std::sin(3.0 * x); }, -8.0, 8.0,
                                   static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(s(0.123));
  }
}
BENCHMARK(BM_SplineTabulation)->Arg(1024)->Arg(4096);

}  // namespace
