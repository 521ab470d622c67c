#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bsde/errors.hpp"
#include "bsde/metrics.hpp"
#include "bsde/oracle.hpp"
#include "bsde/paths.hpp"
#include "bsde/schemes.hpp"

using namespace bsde;
using Catch::Approx;

namespace {

QuadBackend small_quad() {
  QuadBackend qb;
  qb.n_q = 16;
  qb.grid_points = 2048;
  return qb;
}

}  // namespace

TEST_CASE("euler scheme, exact cases with the quadrature backend") {
  const SdeModel bm = make_standard_brownian(0.0, 1.0, 0.0);
  const Driver zero = make_zero_driver(1.0);
  SECTION("identity terminal is reproduced along paths") {
    const TimeGrid grid = make_grid(1.0, 32, 0.7);
    const DiscreteSolution sol =
        euler_scheme(bm, zero, make_identity_terminal(), grid, Backend{small_quad()});
    const PathBatch batch = simulate(bm, grid, 500, 17);
    double worst_y = 0.0, worst_z = 0.0;
    for (int m = 0; m < batch.M; ++m)
      for (int i = 0; i < grid.steps; ++i) {
        const double x = batch.state_scalar(m, i);
        worst_y = std::fmax(worst_y, std::fabs(sol.y_at(i, x) - x));
        worst_z = std::fmax(worst_z, std::fabs(sol.z_at(i, x) - 1.0));
      }
    CHECK(worst_y < 1e-9);
    CHECK(worst_z < 1e-8);
  }
  SECTION("indicator terminal at the root") {
    const TimeGrid grid = make_grid(1.0, 8, 1.0);
    const DiscreteSolution sol =
        euler_scheme(bm, zero, make_indicator_terminal(0.0), grid, Backend{small_quad()});
    CHECK(sol.y_at(0, 0.0) == Approx(0.5).margin(1e-9));
    CHECK(sol.z_at(0, 0.0) == Approx(0.3989422804014327).margin(1e-6));
  }
  SECTION("terminal consistency is exact") {
    const TimeGrid grid = make_grid(1.0, 4, 1.0);
    const TerminalCondition call = make_capped_call(0.0, 2.0);
    const DiscreteSolution sol = euler_scheme(bm, zero, call, grid, Backend{small_quad()});
    for (double x : {-1.0, 0.3, 2.5})
      CHECK(sol.y_at(grid.steps, x) == call.phi(State::Constant(1, x)));
  }
}

TEST_CASE("euler scheme against the dp oracle on tiny grids") {
  const SdeModel bm = make_standard_brownian(0.0, 1.0, 0.0);
  const TerminalCondition call = make_capped_call(0.0, 2.0);
  SECTION("affine driver") {
    const Driver affine = make_affine_driver(0.7, 0.0, 0.2, 1.0);
    for (int N : {2, 4, 6}) {
      const TimeGrid grid = make_grid(1.0, N, 1.0);
      QuadBackend qb = small_quad();
      qb.n_q = 8;
      qb.grid_points = 4096;
      const DiscreteSolution sol = euler_scheme(bm, affine, call, grid, Backend{qb});
      DpOptions opt;
      opt.n_q = 8;
      const DpSolution dp = brute_force_dp(bm, affine, call, grid, SchemeTag::euler, opt);
      INFO("N=" << N);
      CHECK(sol.y_at(0, 0.0) == Approx(dp.y_root()).margin(1e-9));
      CHECK(sol.z_at(0, 0.0) == Approx(dp.z_root()).margin(1e-9));
    }
  }
  SECTION("dp validates the closed-form affine solution as N grows") {
    const Driver affine = make_affine_driver(1.0, 0.0, 0.5, 1.0);
    const ReferenceSolution ref = closed_form(bm, make_identity_terminal(), affine);
    double prev = 1e9;
    for (int N : {2, 4, 8}) {
      const TimeGrid grid = make_grid(1.0, N, 1.0);
      const DpSolution dp =
          brute_force_dp(bm, affine, make_identity_terminal(), grid, SchemeTag::euler);
      const double err = std::fabs(dp.y_root() - ref.y(0.0, 0.0));
      CHECK(err < prev);
      prev = err;
    }
    CHECK(prev < 0.2);
  }
}

TEST_CASE("malliavin scheme, exact cases with the quadrature backend") {
  const SdeModel bm = make_standard_brownian(0.0, 1.0, 0.0);
  const Driver zero = make_zero_driver(1.0);
  SECTION("identity terminal: z is sigma at every index") {
    const TimeGrid grid = make_grid(1.0, 16, 0.5);
    const DiscreteSolution sol =
        malliavin_weights_scheme(bm, zero, make_identity_terminal(), grid, Backend{small_quad()});
    const PathBatch batch = simulate(bm, grid, 300, 5);
    double worst_y = 0.0, worst_z = 0.0;
    for (int m = 0; m < batch.M; ++m)
      for (int i = 0; i < grid.steps; ++i) {
        const double x = batch.state_scalar(m, i);
        worst_y = std::fmax(worst_y, std::fabs(sol.y_at(i, x) - x));
        worst_z = std::fmax(worst_z, std::fabs(sol.z_at(i, x) - 1.0));
      }
    CHECK(worst_y < 1e-9);
    CHECK(worst_z < 1e-7);
  }
  SECTION("scheme agreement at zero driver") {
    const TimeGrid grid = make_grid(1.0, 12, 0.6);
    const TerminalCondition call = make_capped_call(0.0, 2.0);
    const DiscreteSolution e = euler_scheme(bm, zero, call, grid, Backend{small_quad()});
    const DiscreteSolution m =
        malliavin_weights_scheme(bm, zero, call, grid, Backend{small_quad()});
    for (int i = 0; i <= grid.steps; ++i)
      for (double x : {-0.7, 0.0, 0.9})
        CHECK(e.y_at(i, x) == Approx(m.y_at(i, x)).margin(1e-9));
  }
}

TEST_CASE("malliavin scheme against the dp oracle on tiny grids") {
  const SdeModel bm = make_standard_brownian(0.0, 1.0, 0.0);
  const TerminalCondition call = make_capped_call(0.0, 2.0);
  const Driver quad_driver = quadratic_truncated_driver(0.5, 1.0, 0.5, 1.0, 1);
  for (int N : {2, 3, 4}) {
    const TimeGrid grid = make_grid(1.0, N, 1.0);
    QuadBackend qb = small_quad();
    qb.n_q = 8;
    qb.grid_points = 4096;
    const DiscreteSolution sol =
        malliavin_weights_scheme(bm, quad_driver, call, grid, Backend{qb});
    DpOptions opt;
    opt.n_q = 8;
    const DpSolution dp = brute_force_dp(bm, quad_driver, call, grid, SchemeTag::malliavin, opt);
    INFO("N=" << N);
    CHECK(sol.y_at(0, 0.0) == Approx(dp.y_root()).margin(1e-9));
    CHECK(sol.z_at(0, 0.0) == Approx(dp.z_root()).margin(1e-9));
  }
}

TEST_CASE("lsmc backends reproduce easy solutions") {
  const SdeModel bm = make_standard_brownian(0.0, 1.0, 0.0);
  const Driver zero = make_zero_driver(1.0);
  const TimeGrid grid = make_grid(1.0, 8, 1.0);
  const PathBatch batch = simulate(bm, grid, 100000, 61);
  LsmcBackend lb;
  lb.basis.degree = 2;
  SECTION("euler, identity terminal") {
    // The root dispersion accumulates regression noise across all N fits, so
    // the tolerance is a measured scale, not the final-fit SE alone.
    const DiscreteSolution sol =
        euler_scheme(bm, zero, make_identity_terminal(), grid, Backend{lb}, &batch);
    CHECK(sol.y_at(0, 0.0) == Approx(0.0).margin(0.02));
    CHECK(sol.z_at(0, 0.0) == Approx(1.0).margin(0.05));
    CHECK(sol.M == batch.M);
    CHECK(sol.y0_se > 0.0);
  }
  SECTION("malliavin, identity terminal") {
    const DiscreteSolution sol = malliavin_weights_scheme(bm, zero, make_identity_terminal(),
                                                          grid, Backend{lb}, &batch);
    CHECK(sol.y_at(0, 0.0) == Approx(0.0).margin(0.02));
    CHECK(sol.z_at(0, 0.0) == Approx(1.0).margin(0.05));
  }
  SECTION("lsmc needs a batch") {
    CHECK_THROWS_AS(euler_scheme(bm, zero, make_identity_terminal(), grid, Backend{lb}, nullptr),
                    InvalidParameter);
  }
}

TEST_CASE("comparison principle spot check") {
  // Nonnegative terminal, driver a y + c with c >= 0 keeps Ybar nonnegative.
  const SdeModel bm = make_standard_brownian(0.0, 1.0, 0.0);
  const Driver affine = make_affine_driver(0.5, 0.0, 0.2, 1.0);
  const TerminalCondition call = make_capped_call(0.0, 2.0);
  const TimeGrid grid = make_grid(1.0, 8, 0.8);
  const DiscreteSolution sol = euler_scheme(bm, affine, call, grid, Backend{small_quad()});
  for (int i = 0; i < grid.steps; ++i)
    for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) CHECK(sol.y_at(i, x) >= -1e-9);
}

TEST_CASE("representation probe") {
  const SdeModel bm = make_standard_brownian(0.0, 1.0, 0.0);
  const TimeGrid fine = make_grid(1.0, 256, 1.0);
  SECTION("identity terminal") {
    const Driver zero = make_zero_driver(1.0);
    const ReferenceSolution ref = closed_form(bm, make_identity_terminal(), zero);
    const ProbeResult p =
        representation_probe(bm, zero, make_identity_terminal(), fine, 40000, 3, ref);
    CHECK(std::fabs(p.estimate - 1.0) <= 3.0 * p.stderr_);
  }
  SECTION("indicator terminal") {
    const Driver zero = make_zero_driver(1.0);
    const ReferenceSolution ref = closed_form(bm, make_indicator_terminal(0.0), zero);
    const ProbeResult p =
        representation_probe(bm, zero, make_indicator_terminal(0.0), fine, 60000, 4, ref);
    CHECK(std::fabs(p.estimate - 0.3989422804014327) <= 3.0 * p.stderr_);
  }
  SECTION("constant driver contributes zero-mean weight terms") {
    const Driver constant = make_affine_driver(0.0, 0.0, 0.7, 1.0);
    const ReferenceSolution ref = closed_form(bm, make_identity_terminal(), constant);
    const ProbeResult p =
        representation_probe(bm, constant, make_identity_terminal(), fine, 40000, 5, ref);
    CHECK(std::fabs(p.estimate - 1.0) <= 3.0 * p.stderr_);
  }
}

TEST_CASE("grid refinement shrinks the measured error") {
  const SdeModel bm = make_standard_brownian(0.0, 1.0, 0.0);
  const Driver zero = make_zero_driver(1.0);
  const TerminalCondition call = make_capped_call(0.0, 2.0);
  const ReferenceSolution ref = closed_form(bm, call, zero);
  double coarse = 0.0;
  for (int N : {8, 32}) {
    const TimeGrid grid = make_grid(1.0, N, 0.9);
    const DiscreteSolution sol = euler_scheme(bm, zero, call, grid, Backend{small_quad()});
    const ErrorReport report =
        scheme_error(sol, ref, bm, zero, call, 20000, 1000 + N, 4, zero.theta_L);
    if (N == 8)
      coarse = report.total;
    else
      CHECK(report.total < coarse * 1.1);
  }
}
