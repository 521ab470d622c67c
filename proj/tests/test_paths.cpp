#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "bsde/errors.hpp"
#include "bsde/paths.hpp"
#include "bsde/util.hpp"

using namespace bsde;
using Catch::Approx;

TEST_CASE("simulate on the standard Brownian model") {
  const SdeModel model = make_standard_brownian(0.0, 1.0, 0.0);
  const TimeGrid grid = make_grid(1.0, 16, 1.0);
  const PathBatch batch = simulate(model, grid, 2000, 42);

  SECTION("states are the cumulated increments") {
    for (int m = 0; m < 50; ++m) {
      double acc = 0.0;
      for (int k = 0; k < 16; ++k) {
        acc += batch.dw_scalar(m, k);
        CHECK(batch.state_scalar(m, k + 1) == Approx(acc).margin(1e-15));
      }
    }
  }
  SECTION("tangents are identity and unstored") {
    CHECK_FALSE(batch.stores_tangents());
    CHECK(batch.tangent(3, 7)(0, 0) == 1.0);
    CHECK(batch.inv_tangent(3, 7)(0, 0) == 1.0);
  }
  SECTION("increment moments") {
    const int M = batch.M;
    for (int k : {0, 7, 15}) {
      double s = 0, ss = 0;
      for (int m = 0; m < M; ++m) {
        s += batch.dw_scalar(m, k);
        ss += batch.dw_scalar(m, k) * batch.dw_scalar(m, k);
      }
      const double mean = s / M;
      const double var = ss / M - mean * mean;
      const double dt = grid.delta(k);
      // mean within 5 SE of 0; variance within 5 SE of dt.
      CHECK(std::fabs(mean) <= 5.0 * std::sqrt(dt / M));
      CHECK(std::fabs(var - dt) <= 5.0 * dt * std::sqrt(2.0 / M));
    }
  }
  SECTION("determinism and path-subset stability") {
    const PathBatch again = simulate(model, grid, 2000, 42);
    CHECK(again.states == batch.states);
    const PathBatch fewer = simulate(model, grid, 10, 42);
    for (int m = 0; m < 10; ++m)
      for (int k = 0; k <= 16; ++k)
        CHECK(fewer.state_scalar(m, k) == batch.state_scalar(m, k));
  }
}

TEST_CASE("simulate on the tanh model") {
  const SdeModel model = make_tanh_model(0.3, 1.0, 0.4, 0.2);
  const TimeGrid grid = make_grid(1.0, 32, 0.5);
  const PathBatch batch = simulate(model, grid, 20000, 7);

  SECTION("tangent times inverse tangent is the identity") {
    REQUIRE(batch.stores_tangents());
    double worst = 0.0;
    for (int m = 0; m < 200; ++m)
      for (int k = 0; k <= 32; ++k) {
        const Matrix prod = batch.tangent(m, k) * batch.inv_tangent(m, k);
        worst = std::fmax(worst, std::fabs(prod(0, 0) - 1.0));
      }
    CHECK(worst < 1e-8);
  }
  SECTION("terminal mean agrees with an independent fine-grid run") {
    const TimeGrid fine = make_grid(1.0, 32 * 64, 0.5);
    const PathBatch ref = simulate(model, fine, 20000, 1234);
    double s1 = 0, s2 = 0, ss2 = 0;
    for (int m = 0; m < batch.M; ++m) s1 += batch.state_scalar(m, 32);
    for (int m = 0; m < ref.M; ++m) {
      const double v = ref.state_scalar(m, fine.steps);
      s2 += v;
      ss2 += v * v;
    }
    const double m1 = s1 / batch.M, m2 = s2 / ref.M;
    const double sd = std::sqrt(ss2 / ref.M - m2 * m2);
    CHECK(std::fabs(m1 - m2) <= 5.0 * sd * std::sqrt(2.0 / batch.M));
  }
  SECTION("generic Euler stepping matches the constant-coefficient path bitwise") {
    SdeModel frozen = make_standard_brownian(0.1, 0.8, 0.3);
    SdeModel generic = frozen;
    generic.constant_coefficients = false;  // force the tangent-carrying code path
    const TimeGrid g = make_grid(1.0, 16, 1.0);
    const PathBatch exact = simulate(frozen, g, 50, 99);
    const PathBatch euler = simulate(generic, g, 50, 99);
    CHECK(exact.states == euler.states);
  }
}

TEST_CASE("malliavin derivative") {
  SECTION("constant model: flow is the identity, derivative is sigma") {
    const SdeModel model = make_standard_brownian(0.0, 1.3, 0.0);
    const TimeGrid grid = make_grid(1.0, 8, 1.0);
    const PathBatch batch = simulate(model, grid, 20, 5);
    const auto d = malliavin_derivative(batch, 2, 6);
    for (const auto& mat : d) CHECK(mat(0, 0) == Approx(1.3));
  }
  SECTION("k = i returns sigma at the anchor") {
    const SdeModel model = make_tanh_model(0.2, 1.0, 0.3, 0.0);
    const TimeGrid grid = make_grid(1.0, 8, 1.0);
    const PathBatch batch = simulate(model, grid, 100, 6);
    const auto d = malliavin_derivative(batch, 3, 3);
    for (int m = 0; m < 100; ++m) {
      const double sig = model.sigma(grid.t(3), batch.state(m, 3))(0, 0);
      CHECK(d[static_cast<std::size_t>(m)](0, 0) == Approx(sig).margin(1e-12));
    }
  }
  SECTION("second moments stay bounded on the tanh model") {
    const SdeModel model = make_tanh_model(0.2, 1.0, 0.3, 0.0);
    const TimeGrid grid = make_grid(1.0, 16, 0.5);
    const PathBatch batch = simulate(model, grid, 5000, 8);
    double worst = 0.0;
    for (int i : {0, 4, 9})
      for (int k : {10, 13, 16}) {
        const auto d = malliavin_derivative(batch, i, k);
        double ss = 0.0;
        for (const auto& mat : d) ss += mat(0, 0) * mat(0, 0);
        worst = std::fmax(worst, ss / batch.M);
      }
    // A crude uniform bound; the point is no growth with (i,k).
    CHECK(worst < 10.0);
  }
}

TEST_CASE("malliavin weights") {
  const SdeModel model = make_standard_brownian(0.0, 1.0, 0.0);
  const TimeGrid grid = make_grid(1.0, 16, 1.0);
  const PathBatch batch = simulate(model, grid, 100000, 21);

  SECTION("unit-volatility model: H^i_j is the scaled Brownian increment") {
    const MalliavinWeightSet set = malliavin_weights(batch, 3);
    for (int m = 0; m < 50; ++m) {
      double acc = 0.0;
      for (int k = 3; k < 9; ++k) acc += batch.dw_scalar(m, k);
      CHECK(set.weight(m, 9)[0] == Approx(acc / grid.span(3, 9)).epsilon(1e-12));
    }
  }
  SECTION("zero mean within 5 SE") {
    const MalliavinWeightSet set = malliavin_weights(batch, 5);
    for (int j : {6, 10, 16}) {
      double s = 0, ss = 0;
      for (int m = 0; m < batch.M; ++m) {
        const double w = set.weight(m, j)[0];
        s += w;
        ss += w * w;
      }
      const double mean = s / batch.M;
      const double sd = std::sqrt(ss / batch.M - mean * mean);
      CHECK(std::fabs(mean) <= 5.0 * sd / std::sqrt(static_cast<double>(batch.M)));
    }
  }
  SECTION("second moment bound E|H|^2 <= C/(t_j - t_i)") {
    const MalliavinWeightSet set = malliavin_weights(batch, 2);
    for (int j : {3, 8, 16}) {
      double ss = 0;
      for (int m = 0; m < batch.M; ++m) {
        const double w = set.weight(m, j)[0];
        ss += w * w;
      }
      const double moment = ss / batch.M;
      // C_M = 1 for this model; allow sampling slack.
      CHECK(moment * grid.span(2, j) <= 1.0 + 5.0 * std::sqrt(2.0 / batch.M));
    }
  }
  SECTION("integration by parts: E[W_T (W_T - 0)/T] = 1") {
    const MalliavinWeightSet set = malliavin_weights(batch, 0);
    std::vector<double> prods(static_cast<std::size_t>(batch.M));
    for (int m = 0; m < batch.M; ++m)
      prods[static_cast<std::size_t>(m)] = batch.state_scalar(m, 16) * set.weight(m, 16)[0];
    const MeanSe r = mean_and_se(prods);
    CHECK(std::fabs(r.mean - 1.0) <= 3.0 * r.se);
  }
  SECTION("printed-formula variant differs by sigma^2 on constant models") {
    const SdeModel scaled = make_standard_brownian(0.0, 2.0, 0.0);
    const PathBatch b2 = simulate(scaled, grid, 50, 22);
    const MalliavinWeightSet norm = malliavin_weights(b2, 1, WeightFormula::normalized);
    const MalliavinWeightSet printed = malliavin_weights(b2, 1, WeightFormula::printed);
    for (int m = 0; m < 50; ++m)
      CHECK(printed.weight(m, 8)[0] == Approx(4.0 * norm.weight(m, 8)[0]).epsilon(1e-12));
  }
}

TEST_CASE("quantified weight bound on the tanh model") {
  const SdeModel model = make_tanh_model(0.2, 1.0, 0.3, 0.0);
  const TimeGrid grid = make_grid(1.0, 8, 1.0);
  const PathBatch batch = simulate(model, grid, 20000, 31);
  // Measured ||sigma^{-1}||^2 sup E|D|^2 dominates (t_j - t_i) E|H|^2.
  double sup_d = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int k = i; k <= 8; ++k) {
      const auto d = malliavin_derivative(batch, i, k);
      double ss = 0.0;
      for (const auto& mat : d) ss += mat(0, 0) * mat(0, 0);
      sup_d = std::fmax(sup_d, ss / batch.M);
    }
  const double inv_bound = 1.0 / (1.0 - 0.3);  // 1/min sigma
  const double c_m = inv_bound * inv_bound * sup_d;
  for (int i : {0, 3, 6}) {
    const MalliavinWeightSet set = malliavin_weights(batch, i);
    for (int j = i + 1; j <= 8; ++j) {
      double ss = 0.0;
      for (int m = 0; m < batch.M; ++m) ss += set.weight(m, j)[0] * set.weight(m, j)[0];
      const double lhs = grid.span(i, j) * ss / batch.M;
      CHECK(lhs <= c_m * (1.0 + 5.0 * std::sqrt(2.0 / batch.M)));
    }
  }
}

TEST_CASE("batch binary round trip") {
  const SdeModel model = make_tanh_model(0.2, 1.0, 0.3, 0.1);
  const TimeGrid grid = make_grid(1.0, 8, 0.5);
  const PathBatch batch = simulate(model, grid, 37, 55);
  std::stringstream ss;
  write_batch_binary(batch, ss);
  const PathBatch back = read_batch_binary(ss, model);
  CHECK(back.M == batch.M);
  CHECK(back.seed == batch.seed);
  CHECK(back.states == batch.states);
  CHECK(back.dw == batch.dw);
  CHECK(back.tangents == batch.tangents);
  CHECK(back.inv_tangents == batch.inv_tangents);
}

TEST_CASE("simulation overflow is reported") {
  SdeModel model = make_standard_brownian(0.0, 1.0, 0.0);
  model.name = "explosive";
  model.constant_coefficients = false;
  model.b = [](double, const State& x) { return State::Constant(1, x[0] * x[0] * x[0] * 1e6); };
  const TimeGrid grid = make_grid(1.0, 64, 1.0);
  CHECK_THROWS_AS(simulate(model, grid, 64, 3), SimulationOverflow);
}
