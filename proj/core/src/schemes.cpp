#include "bsde/schemes.hpp"

#include <atomic>
#include <cmath>
#include <ostream>

#include "bsde/errors.hpp"
#include "bsde/oracle.hpp"
#include "bsde/rng.hpp"
#include "bsde/util.hpp"

namespace bsde {

namespace {

struct ConstantCoeffs {
  double b = 0.0;
  double sigma = 1.0;
  double x0 = 0.0;
};

ConstantCoeffs scalar_coeffs(const SdeModel& model, const char* who) {
  if (!model.constant_coefficients || model.dim_d != 1 || model.dim_q != 1)
    throw UnsupportedModel(std::string(who) +
                           ": quadrature backend needs a constant-coefficient model with d=q=1");
  ConstantCoeffs c;
  c.b = model.b(0.0, model.x0)[0];
  c.sigma = model.sigma(0.0, model.x0)(0, 0);
  c.x0 = model.x0[0];
  return c;
}

struct StateAxis {
  double lo = 0.0;
  double hi = 1.0;
  int n = 0;
};

StateAxis make_axis(const ConstantCoeffs& c, const TimeGrid& grid, const QuadBackend& qb) {
  const double span = qb.range_sigmas * std::fabs(c.sigma) * std::sqrt(grid.horizon);
  const double drift_lo = std::fmin(0.0, c.b * grid.horizon);
  const double drift_hi = std::fmax(0.0, c.b * grid.horizon);
  StateAxis ax;
  ax.lo = c.x0 + drift_lo - span;
  ax.hi = c.x0 + drift_hi + span;
  ax.n = qb.grid_points;
  return ax;
}

double axis_x(const StateAxis& ax, int k) {
  return ax.lo + (ax.hi - ax.lo) * static_cast<double>(k) / (ax.n - 1);
}

// One-step projection of g through the Gaussian transition over [t_i, t_{i+1}].
// `split` enables the breakpoint-aware rule used when g is the raw terminal.
struct OneStep {
  GaussianTransition tr;
  const QuadratureRule* rule = nullptr;
  bool split = false;
  const std::vector<double>* breakpoints = nullptr;
  int segment_order = 32;
  double z_max = 10.0;

  double expect(const std::function<double(double)>& g, double x, bool increment) const {
    if (split)
      return quad_expect_split(tr, g, x, increment, *breakpoints, segment_order, z_max);
    return quad_expect(*rule, tr, g, x, increment);
  }
};

OneStep make_step(const ConstantCoeffs& c, const TimeGrid& grid, int i, const QuadBackend& qb,
                  const TerminalCondition* terminal_for_split) {
  OneStep st;
  const double dt = grid.delta(i);
  st.tr = GaussianTransition{c.b * dt, c.sigma * std::sqrt(dt), std::sqrt(dt)};
  st.rule = &QuadratureRule::gauss_hermite(qb.n_q);
  st.segment_order = qb.terminal_segment_order;
  st.z_max = qb.z_max;
  if (terminal_for_split != nullptr && !terminal_for_split->breakpoints.empty()) {
    st.split = true;
    st.breakpoints = &terminal_for_split->breakpoints;
  }
  return st;
}

void check_scheme_preconditions(const Driver& driver, const TimeGrid& grid) {
  if (std::fabs(driver.horizon - grid.horizon) > 1e-12 * grid.horizon)
    throw InvalidParameter("scheme: driver horizon does not match the grid horizon");
}

}  // namespace

// ---- Euler scheme ----

namespace {

DiscreteSolution euler_quad(const SdeModel& model, const Driver& driver,
                            const TerminalCondition& terminal, const TimeGrid& grid,
                            const QuadBackend& qb) {
  const ConstantCoeffs c = scalar_coeffs(model, "euler_scheme");
  const StateAxis ax = make_axis(c, grid, qb);
  const int N = grid.steps;

  DiscreteSolution sol;
  sol.grid = grid;
  sol.scheme = SchemeTag::euler;
  sol.y_fn.resize(static_cast<std::size_t>(N) + 1);
  sol.z_fn.resize(static_cast<std::size_t>(N));
  auto phi = terminal.phi;
  auto phi1 = [phi](double x) { return phi(State::Constant(1, x)); };
  sol.y_fn[static_cast<std::size_t>(N)] = StateFunction::callable(phi1);

  std::vector<double> yv(static_cast<std::size_t>(ax.n)), zv(static_cast<std::size_t>(ax.n));
  for (int i = N - 1; i >= 0; --i) {
    const bool last = (i == N - 1);
    const OneStep st = make_step(c, grid, i, qb, last ? &terminal : nullptr);
    const StateFunction next = sol.y_fn[static_cast<std::size_t>(i) + 1];
    const double t = grid.t(i);
    const double dt = grid.delta(i);
    parallel_for(static_cast<std::size_t>(ax.n), [&](std::size_t kb, std::size_t ke) {
      RowVec zrow(1);
      for (std::size_t k = kb; k < ke; ++k) {
        const double x = axis_x(ax, static_cast<int>(k));
        auto g = [&next](double v) { return next(v); };
        const double zval = st.expect(g, x, true) / dt;
        zrow[0] = zval;
        auto gy = [&](double v) {
          const double ynext = next(v);
          return ynext + driver.f(t, State::Constant(1, x), ynext, zrow) * dt;
        };
        zv[k] = zval;
        yv[k] = st.expect(gy, x, false);
      }
    });
    sol.z_fn[static_cast<std::size_t>(i)] = StateFunction::spline(ax.lo, ax.hi, zv);
    sol.y_fn[static_cast<std::size_t>(i)] = StateFunction::spline(ax.lo, ax.hi, yv);
  }
  return sol;
}

DiscreteSolution euler_lsmc(const SdeModel& model, const Driver& driver,
                            const TerminalCondition& terminal, const TimeGrid& grid,
                            const LsmcBackend& lb, const PathBatch& batch) {
  const int N = grid.steps, M = batch.M;
  DiscreteSolution sol;
  sol.grid = grid;
  sol.scheme = SchemeTag::euler;
  sol.M = M;
  sol.y_fn.resize(static_cast<std::size_t>(N) + 1);
  sol.z_fn.resize(static_cast<std::size_t>(N));
  sol.y_path.resize(static_cast<std::size_t>(M) * (N + 1));
  sol.z_path.resize(static_cast<std::size_t>(M) * N);
  auto phi = terminal.phi;
  auto phi1 = [phi](double x) { return phi(State::Constant(1, x)); };
  sol.y_fn[static_cast<std::size_t>(N)] = StateFunction::callable(phi1);
  for (int m = 0; m < M; ++m)
    sol.y_path[static_cast<std::size_t>(m) * (N + 1) + N] = phi1(batch.state_scalar(m, N));

  std::vector<double> tz(static_cast<std::size_t>(M)), ty(static_cast<std::size_t>(M));
  for (int i = N - 1; i >= 0; --i) {
    const double t = grid.t(i);
    const double dt = grid.delta(i);
    for (int m = 0; m < M; ++m) {
      const double ynext = sol.y_path[static_cast<std::size_t>(m) * (N + 1) + i + 1];
      tz[static_cast<std::size_t>(m)] = ynext * batch.dw_scalar(m, i) / dt;
    }
    LsmcFitResult zfit;
    try {
      zfit = lsmc_fit_full(batch, i, tz, lb.basis);
    } catch (const BsdeError& e) {
      throw RankDeficientDesign("euler_scheme: z fit failed at time index " + std::to_string(i) +
                                ": " + e.what());
    }
    sol.z_fn[static_cast<std::size_t>(i)] = zfit.fn;
    parallel_for(static_cast<std::size_t>(M), [&](std::size_t mb, std::size_t me) {
      RowVec zrow(1);
      for (std::size_t m = mb; m < me; ++m) {
        const double zi = zfit.fn(batch.state_scalar(static_cast<int>(m), i));
        sol.z_path[m * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)] = zi;
        const double ynext = sol.y_path[m * static_cast<std::size_t>(N + 1) + i + 1];
        zrow[0] = zi;
        ty[m] = ynext + driver.f(t, State::Constant(1, batch.state_scalar(static_cast<int>(m), i)),
                                 ynext, zrow) *
                            dt;
      }
    });
    LsmcFitResult yfit;
    try {
      yfit = lsmc_fit_full(batch, i, ty, lb.basis);
    } catch (const BsdeError& e) {
      throw RankDeficientDesign("euler_scheme: y fit failed at time index " + std::to_string(i) +
                                ": " + e.what());
    }
    sol.y_fn[static_cast<std::size_t>(i)] = yfit.fn;
    for (int m = 0; m < M; ++m)
      sol.y_path[static_cast<std::size_t>(m) * (N + 1) + i] =
          yfit.fn(batch.state_scalar(m, i));
    if (i == 0) {
      const double x0 = batch.state_scalar(0, 0);
      sol.y0_se = yfit.prediction_se(x0);
      sol.z0_se = zfit.prediction_se(x0);
    }
  }
  return sol;
}

}  // namespace

DiscreteSolution euler_scheme(const SdeModel& model, const Driver& driver,
                              const TerminalCondition& terminal, const TimeGrid& grid,
                              const Backend& backend, const PathBatch* batch) {
  check_scheme_preconditions(driver, grid);
  if (std::holds_alternative<QuadBackend>(backend))
    return euler_quad(model, driver, terminal, grid, std::get<QuadBackend>(backend));
  if (batch == nullptr)
    throw InvalidParameter("euler_scheme: the LSMC backend needs a path batch");
  return euler_lsmc(model, driver, terminal, grid, std::get<LsmcBackend>(backend), *batch);
}

// ---- Malliavin weights scheme ----

namespace {

// Propagated conditional expectations of one source function g anchored at
// level j: u_l(x) = E_l[g(X_j)], h_l(x) = E_l[g(X_j)(W_j - W_l)]. Advancing a
// level uses u_l = P_l u_{l+1}, h_l = Q_l u_{l+1} + P_l h_{l+1} with P/Q the
// plain and increment-weighted one-step projections.
struct PropagatedPair {
  int source_level = 0;
  StateFunction u;
  StateFunction h;  // zero at the source level
};

DiscreteSolution malliavin_quad(const SdeModel& model, const Driver& driver,
                                const TerminalCondition& terminal, const TimeGrid& grid,
                                const QuadBackend& qb) {
  const ConstantCoeffs c = scalar_coeffs(model, "malliavin_weights_scheme");
  const StateAxis ax = make_axis(c, grid, qb);
  const int N = grid.steps;
  const bool zero_driver = (driver.L_f == 0.0 && driver.C_f == 0.0);

  DiscreteSolution sol;
  sol.grid = grid;
  sol.scheme = SchemeTag::malliavin;
  sol.y_fn.resize(static_cast<std::size_t>(N) + 1);
  sol.z_fn.resize(static_cast<std::size_t>(N));
  auto phi = terminal.phi;
  auto phi1 = [phi](double x) { return phi(State::Constant(1, x)); };
  sol.y_fn[static_cast<std::size_t>(N)] = StateFunction::callable(phi1);

  PropagatedPair terminal_pair;
  terminal_pair.source_level = N;
  terminal_pair.u = sol.y_fn[static_cast<std::size_t>(N)];
  std::vector<PropagatedPair> driver_pairs;  // indexed by source level j, descending

  std::vector<double> tab_u(static_cast<std::size_t>(ax.n)), tab_h(static_cast<std::size_t>(ax.n));
  std::vector<double> yv(static_cast<std::size_t>(ax.n)), zv(static_cast<std::size_t>(ax.n));

  auto advance_pair = [&](PropagatedPair& pair, const OneStep& st) {
    const StateFunction u_next = pair.u;
    const StateFunction h_next = pair.h;
    const bool h_zero = h_next.is_zero();
    parallel_for(static_cast<std::size_t>(ax.n), [&](std::size_t kb, std::size_t ke) {
      for (std::size_t k = kb; k < ke; ++k) {
        const double x = axis_x(ax, static_cast<int>(k));
        auto gu = [&u_next](double v) { return u_next(v); };
        tab_u[k] = st.expect(gu, x, false);
        double h = st.expect(gu, x, true);
        if (!h_zero) {
          auto gh = [&h_next](double v) { return h_next(v); };
          h += st.expect(gh, x, false);
        }
        tab_h[k] = h;
      }
    });
    pair.u = StateFunction::spline(ax.lo, ax.hi, tab_u);
    pair.h = StateFunction::spline(ax.lo, ax.hi, tab_h);
  };

  for (int i = N - 1; i >= 0; --i) {
    const bool last = (i == N - 1);
    const OneStep st = make_step(c, grid, i, qb, last ? &terminal : nullptr);
    advance_pair(terminal_pair, st);
    for (auto& pair : driver_pairs) advance_pair(pair, st);

    // Z first: its sum has no j = i term.
    const double tau_N = grid.span(i, N);
    parallel_for(static_cast<std::size_t>(ax.n), [&](std::size_t kb, std::size_t ke) {
      for (std::size_t k = kb; k < ke; ++k) {
        const double x = axis_x(ax, static_cast<int>(k));
        double z = terminal_pair.h(x) / tau_N;
        for (const auto& pair : driver_pairs) {
          const int j = pair.source_level;
          z += grid.delta(j) * pair.h(x) / grid.span(i, j);
        }
        zv[k] = z;
      }
    });
    sol.z_fn[static_cast<std::size_t>(i)] = StateFunction::spline(ax.lo, ax.hi, zv);

    // Driver integrand at level i, using the just-fitted zhat_i:
    // g_i(x) = E[f(t_i, x, yhat_{i+1}(X_{i+1}), zhat_i(x)) | X_i = x].
    const StateFunction z_i = sol.z_fn[static_cast<std::size_t>(i)];
    const StateFunction y_next = sol.y_fn[static_cast<std::size_t>(i) + 1];
    const double t_i = grid.t(i);
    std::vector<double> g_i(static_cast<std::size_t>(ax.n), 0.0);
    if (!zero_driver) {
      parallel_for(static_cast<std::size_t>(ax.n), [&](std::size_t kb, std::size_t ke) {
        RowVec zrow(1);
        for (std::size_t k = kb; k < ke; ++k) {
          const double x = axis_x(ax, static_cast<int>(k));
          zrow[0] = z_i(x);
          auto g = [&](double v) {
            return driver.f(t_i, State::Constant(1, x), y_next(v), zrow);
          };
          g_i[k] = st.expect(g, x, false);
        }
      });
    }
    parallel_for(static_cast<std::size_t>(ax.n), [&](std::size_t kb, std::size_t ke) {
      for (std::size_t k = kb; k < ke; ++k) {
        const double x = axis_x(ax, static_cast<int>(k));
        double y = terminal_pair.u(x) + grid.delta(i) * g_i[k];
        for (const auto& pair : driver_pairs) {
          const int j = pair.source_level;
          y += grid.delta(j) * pair.u(x);
        }
        yv[k] = y;
      }
    });
    sol.y_fn[static_cast<std::size_t>(i)] = StateFunction::spline(ax.lo, ax.hi, yv);

    if (!zero_driver && i > 0) {
      PropagatedPair pair;
      pair.source_level = i;
      pair.u = StateFunction::spline(ax.lo, ax.hi, g_i);
      driver_pairs.push_back(std::move(pair));
    }
  }
  return sol;
}

DiscreteSolution malliavin_lsmc(const SdeModel& model, const Driver& driver,
                                const TerminalCondition& terminal, const TimeGrid& grid,
                                const LsmcBackend& lb, const PathBatch& batch,
                                WeightFormula formula) {
  const int N = grid.steps, M = batch.M;
  DiscreteSolution sol;
  sol.grid = grid;
  sol.scheme = SchemeTag::malliavin;
  sol.M = M;
  sol.y_fn.resize(static_cast<std::size_t>(N) + 1);
  sol.z_fn.resize(static_cast<std::size_t>(N));
  sol.y_path.resize(static_cast<std::size_t>(M) * (N + 1));
  sol.z_path.resize(static_cast<std::size_t>(M) * N);
  auto phi = terminal.phi;
  auto phi1 = [phi](double x) { return phi(State::Constant(1, x)); };
  sol.y_fn[static_cast<std::size_t>(N)] = StateFunction::callable(phi1);

  std::vector<double> phi_T(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    phi_T[static_cast<std::size_t>(m)] = phi1(batch.state_scalar(m, N));
    sol.y_path[static_cast<std::size_t>(m) * (N + 1) + N] = phi_T[static_cast<std::size_t>(m)];
  }

  // f(t_j, X_j, yhat_{j+1}(X_{j+1}), zhat_j(X_j)) per path, filled as levels fit.
  std::vector<double> fval(static_cast<std::size_t>(M) * N, 0.0);
  // Running S_Y = Phi + sum_{j > i} f_j Delta_j (the j = i term joins per step).
  std::vector<double> sy_run = phi_T;
  std::vector<double> tz(static_cast<std::size_t>(M)), ty(static_cast<std::size_t>(M));
  double prev_sz_var = -1.0;

  for (int i = N - 1; i >= 0; --i) {
    const double t_i = grid.t(i);
    const double dt_i = grid.delta(i);

    // Assemble S_Z with a fresh anchored weight sweep.
    WeightAccumulator acc(batch, i, formula);
    std::fill(tz.begin(), tz.end(), 0.0);
    for (int j = i + 1; j <= N; ++j) {
      acc.advance();
      if (j < N) {
        const double dt_j = grid.delta(j);
        parallel_for(static_cast<std::size_t>(M), [&](std::size_t mb, std::size_t me) {
          for (std::size_t m = mb; m < me; ++m)
            tz[m] += fval[m * static_cast<std::size_t>(N) + static_cast<std::size_t>(j)] *
                     acc.weight(static_cast<int>(m))[0] * dt_j;
        });
      } else {
        parallel_for(static_cast<std::size_t>(M), [&](std::size_t mb, std::size_t me) {
          for (std::size_t m = mb; m < me; ++m)
            tz[m] += phi_T[m] * acc.weight(static_cast<int>(m))[0];
        });
      }
    }
    {
      MeanSe ms = mean_and_se(tz);
      const double var = ms.se * ms.se * M;
      if (prev_sz_var > 0.0 && var > 16.0 * prev_sz_var)
        sol.warnings.push_back("weight-variance: Var(S_Z) at index " + std::to_string(i) +
                               " exceeds 16x its value at index " + std::to_string(i + 1));
      prev_sz_var = var;
    }

    LsmcFitResult zfit;
    try {
      zfit = lsmc_fit_full(batch, i, tz, lb.basis);
    } catch (const BsdeError& e) {
      throw RankDeficientDesign("malliavin_weights_scheme: z fit failed at time index " +
                                std::to_string(i) + ": " + e.what());
    }
    sol.z_fn[static_cast<std::size_t>(i)] = zfit.fn;
    parallel_for(static_cast<std::size_t>(M), [&](std::size_t mb, std::size_t me) {
      RowVec zrow(1);
      for (std::size_t m = mb; m < me; ++m) {
        const double x = batch.state_scalar(static_cast<int>(m), i);
        const double zi = zfit.fn(x);
        sol.z_path[m * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)] = zi;
        zrow[0] = zi;
        const double ynext = sol.y_path[m * static_cast<std::size_t>(N + 1) + i + 1];
        fval[m * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)] =
            driver.f(t_i, State::Constant(1, x), ynext, zrow);
        ty[m] = sy_run[m] +
                fval[m * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)] * dt_i;
      }
    });

    LsmcFitResult yfit;
    try {
      yfit = lsmc_fit_full(batch, i, ty, lb.basis);
    } catch (const BsdeError& e) {
      throw RankDeficientDesign("malliavin_weights_scheme: y fit failed at time index " +
                                std::to_string(i) + ": " + e.what());
    }
    sol.y_fn[static_cast<std::size_t>(i)] = yfit.fn;
    for (int m = 0; m < M; ++m)
      sol.y_path[static_cast<std::size_t>(m) * (N + 1) + i] =
          yfit.fn(batch.state_scalar(m, i));
    for (int m = 0; m < M; ++m)
      sy_run[static_cast<std::size_t>(m)] = ty[static_cast<std::size_t>(m)];
    if (i == 0) {
      const double x0 = batch.state_scalar(0, 0);
      sol.y0_se = yfit.prediction_se(x0);
      sol.z0_se = zfit.prediction_se(x0);
    }
  }
  return sol;
}

}  // namespace

DiscreteSolution malliavin_weights_scheme(const SdeModel& model, const Driver& driver,
                                          const TerminalCondition& terminal, const TimeGrid& grid,
                                          const Backend& backend, const PathBatch* batch,
                                          WeightFormula formula) {
  check_scheme_preconditions(driver, grid);
  if (std::holds_alternative<QuadBackend>(backend)) {
    if (formula != WeightFormula::normalized)
      throw InvalidParameter(
          "malliavin_weights_scheme: the quadrature backend implements the normalized weights");
    return malliavin_quad(model, driver, terminal, grid, std::get<QuadBackend>(backend));
  }
  if (batch == nullptr)
    throw InvalidParameter("malliavin_weights_scheme: the LSMC backend needs a path batch");
  return malliavin_lsmc(model, driver, terminal, grid, std::get<LsmcBackend>(backend), *batch,
                        formula);
}

ProbeResult representation_probe(const SdeModel& model, const Driver& driver,
                                 const TerminalCondition& terminal, const TimeGrid& fine_grid,
                                 int M, std::uint64_t seed, const ReferenceSolution& reference) {
  if (!reference.y || !reference.z) throw MissingReference("representation_probe: no reference");
  if (model.dim_d != 1 || model.dim_q != 1)
    throw UnsupportedModel("representation_probe: implemented for d = q = 1");
  const int N = fine_grid.steps;
  CounterRng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(M));
  const bool zero_driver = (driver.L_f == 0.0 && driver.C_f == 0.0);

  parallel_for(static_cast<std::size_t>(M), [&](std::size_t mb, std::size_t me) {
    RowVec zrow(1);
    for (std::size_t m = mb; m < me; ++m) {
      double x = model.x0[0];
      double grad = 1.0;  // scalar tangent
      double wsum = 0.0;  // running sum of sigma^{-1} D dW terms
      double driver_term = 0.0;
      State xs(1);
      for (int k = 0; k < N; ++k) {
        const double t = fine_grid.t(k);
        const double dt = fine_grid.delta(k);
        const double dw = std::sqrt(dt) * rng.normal(m, static_cast<std::uint32_t>(k), 0);
        xs[0] = x;
        const double sig_k = model.sigma(t, xs)(0, 0);
        if (k > 0) {
          // H^0_k available before consuming step k.
          const double h = wsum / fine_grid.span(0, k);
          if (!zero_driver) {
            zrow[0] = reference.z(t, x);
            driver_term += driver.f(t, xs, reference.y(t, x), zrow) * h * dt;
          }
        }
        const double sig_0 = model.sigma(0.0, State::Constant(1, model.x0[0]))(0, 0);
        wsum += (grad * sig_0 / sig_k) * dw;  // sigma^{-1}(t_k) D_0 X_k dW
        const double gb = model.grad_b(t, xs)(0, 0);
        const double gs = model.grad_sigma_col(0, t, xs)(0, 0);
        grad *= 1.0 + gb * dt + gs * dw;
        x += model.b(t, xs)[0] * dt + sig_k * dw;
      }
      const double h_T = wsum / fine_grid.span(0, N);
      values[m] = terminal.phi(State::Constant(1, x)) * h_T + driver_term;
    }
  });
  MeanSe ms = mean_and_se(values);
  return ProbeResult{ms.mean, ms.se};
}

void write_solution_csv(const DiscreteSolution& solution, const SdeModel& model,
                        std::ostream& os) {
  const int N = solution.grid.steps;
  const double x0 = model.x0[0];
  os << "index,t,mean_y,mean_z,y_at_x0,z_at_x0\n";
  const bool path_based = solution.M > 0;
  ConstantCoeffs c{};
  if (!path_based) c = scalar_coeffs(model, "write_solution_csv");
  const QuadratureRule& rule = QuadratureRule::gauss_hermite(32);
  for (int i = 0; i <= N; ++i) {
    double mean_y = 0.0, mean_z = 0.0;
    if (path_based) {
      for (int m = 0; m < solution.M; ++m) mean_y += solution.y_path_at(m, i);
      mean_y /= solution.M;
      if (i < N) {
        for (int m = 0; m < solution.M; ++m) mean_z += solution.z_path_at(m, i);
        mean_z /= solution.M;
      }
    } else {
      const double t = solution.grid.t(i);
      const double mean = c.x0 + c.b * t;
      const double sd = std::fabs(c.sigma) * std::sqrt(t);
      const GaussianTransition tr{0.0, sd, 1.0};
      auto gy = [&](double v) { return solution.y_at(i, v); };
      mean_y = (sd > 0.0) ? quad_expect(rule, tr, gy, mean, false) : gy(mean);
      if (i < N) {
        auto gz = [&](double v) { return solution.z_at(i, v); };
        mean_z = (sd > 0.0) ? quad_expect(rule, tr, gz, mean, false) : gz(mean);
      }
    }
    os << i << ',' << format_full(solution.grid.t(i)) << ',' << format_full(mean_y) << ','
       << format_full(i < N ? mean_z : 0.0) << ',' << format_full(solution.y_at(i, x0)) << ','
       << format_full(i < N ? solution.z_at(i, x0) : 0.0) << '\n';
  }
}

}  // namespace bsde
