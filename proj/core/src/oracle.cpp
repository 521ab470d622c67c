#include "bsde/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "bsde/condexp.hpp"
#include "bsde/errors.hpp"
#include "bsde/paths.hpp"
#include "bsde/rng.hpp"
#include "bsde/util.hpp"

namespace bsde {

namespace {

struct Coeffs {
  double b = 0.0;
  double sigma = 1.0;
};

Coeffs constant_coeffs(const SdeModel& model, const char* who) {
  if (!model.constant_coefficients || model.dim_d != 1 || model.dim_q != 1)
    throw UnsupportedModel(std::string(who) + ": needs a constant-coefficient model with d=q=1");
  return Coeffs{model.b(0.0, model.x0)[0], model.sigma(0.0, model.x0)(0, 0)};
}

// Bachelier call value and delta for X_T ~ N(mean, sd^2).
double bachelier_call(double mean, double sd, double strike) {
  if (sd <= 0.0) return std::fmax(mean - strike, 0.0);
  const double d = (mean - strike) / sd;
  return (mean - strike) * normal_cdf(d) + sd * normal_pdf(d);
}

double bachelier_delta(double mean, double sd, double strike) {
  if (sd <= 0.0) return mean > strike ? 1.0 : 0.0;
  return normal_cdf((mean - strike) / sd);
}

}  // namespace

ReferenceSolution closed_form(const SdeModel& model, const TerminalCondition& terminal,
                              const Driver& driver) {
  const Coeffs c = constant_coeffs(model, "closed_form");
  const double T = driver.horizon;
  const double b = c.b, sigma = c.sigma;

  // Zero-driver building blocks u(t,x) and z_u(t,x) = sigma d_x u.
  std::function<double(double, double)> u, zu;
  if (terminal.name == "identity") {
    u = [b, T](double t, double x) { return x + b * (T - t); };
    zu = [sigma](double, double) { return sigma; };
  } else if (terminal.name == "capped-call") {
    const double K = terminal.breakpoints.at(0);
    const double K2 = terminal.breakpoints.at(1);
    u = [b, sigma, T, K, K2](double t, double x) {
      const double tau = T - t;
      const double mean = x + b * tau;
      const double sd = std::fabs(sigma) * std::sqrt(tau);
      return bachelier_call(mean, sd, K) - bachelier_call(mean, sd, K2);
    };
    zu = [b, sigma, T, K, K2](double t, double x) {
      const double tau = T - t;
      const double mean = x + b * tau;
      const double sd = std::fabs(sigma) * std::sqrt(tau);
      return sigma * (bachelier_delta(mean, sd, K) - bachelier_delta(mean, sd, K2));
    };
  } else if (terminal.name == "indicator") {
    const double K = terminal.breakpoints.at(0);
    u = [b, sigma, T, K](double t, double x) {
      const double tau = T - t;
      if (tau <= 0.0) return x >= K ? 1.0 : 0.0;
      return normal_cdf((x + b * tau - K) / (std::fabs(sigma) * std::sqrt(tau)));
    };
    zu = [b, sigma, T, K](double t, double x) {
      const double tau = T - t;
      const double d = (x + b * tau - K) / (std::fabs(sigma) * std::sqrt(tau));
      return sigma * normal_pdf(d) / (std::fabs(sigma) * std::sqrt(tau));
    };
  } else {
    throw UnsupportedCombination("closed_form: terminal '" + terminal.name + "' not supported");
  }

  double a = 0.0, cc = 0.0;
  if (driver.name == "zero") {
    // nothing
  } else if (driver.name == "affine") {
    // Probe the affine coefficients; b.z terms are not supported in closed form.
    RowVec z1 = RowVec::Constant(1, 1.0), z0 = RowVec::Zero(1);
    const State x_probe = State::Zero(1);
    cc = driver.f(0.0, x_probe, 0.0, z0);
    a = driver.f(0.0, x_probe, 1.0, z0) - cc;
    const double bz = driver.f(0.0, x_probe, 0.0, z1) - cc;
    if (std::fabs(bz) > 0.0)
      throw UnsupportedCombination("closed_form: affine driver with a z term is not supported");
  } else {
    throw UnsupportedCombination("closed_form: driver '" + driver.name + "' not supported");
  }

  ReferenceSolution ref;
  ref.model_name = model.name;
  ref.terminal_name = terminal.name;
  ref.driver_name = driver.name;
  ref.validity = "closed-form:" + model.name + ":" + terminal.name + ":" + driver.name;
  ref.z_singularity_exponent = (terminal.alpha - 1.0) / 2.0;
  ref.y = [u, a, cc, T](double t, double x) {
    const double tau = T - t;
    const double tilt = std::exp(a * tau);
    const double source = (a == 0.0) ? cc * tau : (cc / a) * (tilt - 1.0);
    return tilt * u(t, x) + source;
  };
  ref.z = [zu, a, T](double t, double x) { return std::exp(a * (T - t)) * zu(t, x); };
  return ref;
}

// ---- brute-force dynamic programming on the Gaussian tree ----

namespace {

struct TerminalFan {
  // Children of a level N-1 node under the breakpoint-split rule.
  std::vector<double> z;  // standardized nodes
  std::vector<double> w;  // phi-weighted quadrature weights
};

TerminalFan terminal_fan(double x, const GaussianTransition& tr,
                         const std::vector<double>& breakpoints, int order, double z_max) {
  TerminalFan fan;
  std::vector<double> cuts{-z_max};
  for (double bp : breakpoints) {
    const double z = (bp - x - tr.mean_shift) / tr.x_spread;
    if (z > -z_max && z < z_max) cuts.push_back(z);
  }
  cuts.push_back(z_max);
  std::sort(cuts.begin(), cuts.end());
  const LegendreRule& gl = LegendreRule::legendre(order);
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s], bnd = cuts[s + 1];
    if (!(bnd > a)) continue;
    const double mid = 0.5 * (a + bnd), half = 0.5 * (bnd - a);
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double z = mid + half * gl.nodes[k];
      fan.z.push_back(z);
      fan.w.push_back(half * gl.weights[k] * normal_pdf(z));
    }
  }
  return fan;
}

struct Tree {
  TimeGrid grid;
  double b = 0.0, sigma = 1.0;
  int n_q = 8;
  const QuadratureRule* rule = nullptr;
  std::vector<std::vector<double>> states;  // levels 0..N-1
  std::vector<double> phi_of;               // scratch-free: terminal evaluated on demand
};

Tree build_tree(const SdeModel& model, const TimeGrid& grid, const DpOptions& opt,
                SchemeTag scheme) {
  const Coeffs c = constant_coeffs(model, "brute_force_dp");
  const int N = grid.steps;
  double last_level = 1.0;  // nodes at level N-1
  for (int i = 0; i + 1 < N; ++i) last_level *= opt.n_q;
  const double fan = 3.0 * opt.terminal_segment_order;
  // Euler touches every node once; the Malliavin sweep enumerates the subtree
  // paths of every node.
  const double cost = (scheme == SchemeTag::euler)
                          ? last_level * (opt.n_q + fan)
                          : last_level * fan * 0.5 * N * (N + 1);
  if (cost > static_cast<double>(opt.node_budget))
    throw BudgetExceeded("brute_force_dp: tree larger than the configured budget");
  Tree tree;
  tree.grid = grid;
  tree.b = c.b;
  tree.sigma = c.sigma;
  tree.n_q = opt.n_q;
  tree.rule = &QuadratureRule::gauss_hermite(opt.n_q);
  tree.states.resize(static_cast<std::size_t>(N));
  tree.states[0] = {model.x0[0]};
  for (int i = 1; i < N; ++i) {
    const auto& prev = tree.states[static_cast<std::size_t>(i - 1)];
    auto& cur = tree.states[static_cast<std::size_t>(i)];
    cur.resize(prev.size() * static_cast<std::size_t>(opt.n_q));
    const double dt = grid.delta(i - 1);
    const double sq = std::sqrt(dt);
    for (std::size_t p = 0; p < prev.size(); ++p)
      for (int n = 0; n < opt.n_q; ++n)
        cur[p * static_cast<std::size_t>(opt.n_q) + static_cast<std::size_t>(n)] =
            prev[p] + c.b * dt + c.sigma * sq * tree.rule->nodes[static_cast<std::size_t>(n)];
  }
  return tree;
}

}  // namespace

DpSolution brute_force_dp(const SdeModel& model, const Driver& driver,
                          const TerminalCondition& terminal, const TimeGrid& grid,
                          SchemeTag scheme, const DpOptions& options) {
  if (model.dim_d != 1) throw UnsupportedModel("brute_force_dp: implemented for d = 1");
  const int N = grid.steps;
  if (N < 1 || N > 8) throw BudgetExceeded("brute_force_dp: N must be in 1..8");
  Tree tree = build_tree(model, grid, options, scheme);
  auto phi = [&terminal](double x) { return terminal.phi(State::Constant(1, x)); };

  DpSolution sol;
  sol.states = tree.states;
  sol.y_nodes.resize(static_cast<std::size_t>(N));
  sol.z_nodes.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    sol.y_nodes[static_cast<std::size_t>(i)].resize(tree.states[static_cast<std::size_t>(i)].size());
    sol.z_nodes[static_cast<std::size_t>(i)].resize(tree.states[static_cast<std::size_t>(i)].size());
  }

  const double dtN = grid.delta(N - 1);
  const GaussianTransition trN{tree.b * dtN, tree.sigma * std::sqrt(dtN), std::sqrt(dtN)};

  if (scheme == SchemeTag::euler) {
    for (int i = N - 1; i >= 0; --i) {
      const double t = grid.t(i);
      const double dt = grid.delta(i);
      const double sq = std::sqrt(dt);
      auto& ys = sol.y_nodes[static_cast<std::size_t>(i)];
      auto& zs = sol.z_nodes[static_cast<std::size_t>(i)];
      const auto& xs = tree.states[static_cast<std::size_t>(i)];
      parallel_for(xs.size(), [&](std::size_t pb, std::size_t pe) {
        RowVec zrow(1);
        for (std::size_t p = pb; p < pe; ++p) {
          const double x = xs[p];
          double zacc = 0.0, yacc = 0.0;
          if (i == N - 1) {
            const TerminalFan fan =
                terminal_fan(x, trN, terminal.breakpoints, options.terminal_segment_order,
                             options.z_max);
            for (std::size_t k = 0; k < fan.z.size(); ++k) {
              const double leaf = x + trN.mean_shift + trN.x_spread * fan.z[k];
              zacc += fan.w[k] * phi(leaf) * (trN.w_spread * fan.z[k]);
            }
            zacc /= dt;
            zrow[0] = zacc;
            for (std::size_t k = 0; k < fan.z.size(); ++k) {
              const double leaf = x + trN.mean_shift + trN.x_spread * fan.z[k];
              const double ynext = phi(leaf);
              yacc += fan.w[k] * (ynext + driver.f(t, State::Constant(1, x), ynext, zrow) * dt);
            }
          } else {
            const auto& ynext_nodes = sol.y_nodes[static_cast<std::size_t>(i) + 1];
            for (int n = 0; n < tree.n_q; ++n) {
              const double yn =
                  ynext_nodes[p * static_cast<std::size_t>(tree.n_q) + static_cast<std::size_t>(n)];
              zacc += tree.rule->weights[static_cast<std::size_t>(n)] * yn * sq *
                      tree.rule->nodes[static_cast<std::size_t>(n)];
            }
            zacc /= dt;
            zrow[0] = zacc;
            for (int n = 0; n < tree.n_q; ++n) {
              const double yn =
                  ynext_nodes[p * static_cast<std::size_t>(tree.n_q) + static_cast<std::size_t>(n)];
              yacc += tree.rule->weights[static_cast<std::size_t>(n)] *
                      (yn + driver.f(t, State::Constant(1, x), yn, zrow) * dt);
            }
          }
          zs[p] = zacc;
          ys[p] = yacc;
        }
      });
    }
    return sol;
  }

  // Malliavin weights scheme: per node, enumerate the subtree paths carrying
  // the Brownian sum, the driver sum and the weighted driver sum.
  for (int i = N - 1; i >= 0; --i) {
    const auto& xs = tree.states[static_cast<std::size_t>(i)];
    auto& ys = sol.y_nodes[static_cast<std::size_t>(i)];
    auto& zs = sol.z_nodes[static_cast<std::size_t>(i)];
    parallel_for(xs.size(), [&](std::size_t pb, std::size_t pe) {
      RowVec zrow(1);
      for (std::size_t p = pb; p < pe; ++p) {
        double sy = 0.0, sz = 0.0, first = 0.0;
        // Path stack recursion over levels j = i .. N-1; contributions are
        // collected at the leaves.
        std::function<void(int, std::size_t, double, double, double, double)> rec =
            [&](int j, std::size_t node, double wprod, double bsum, double fsum, double zsum) {
              const double x_j = tree.states[static_cast<std::size_t>(j)][node];
              const double t_j = grid.t(j);
              const double dt_j = grid.delta(j);
              const double sq_j = std::sqrt(dt_j);
              if (j == N - 1) {
                const TerminalFan fan =
                    terminal_fan(x_j, trN, terminal.breakpoints, options.terminal_segment_order,
                                 options.z_max);
                for (std::size_t k = 0; k < fan.z.size(); ++k) {
                  const double leaf = x_j + trN.mean_shift + trN.x_spread * fan.z[k];
                  const double dw = trN.w_spread * fan.z[k];
                  const double w2 = wprod * fan.w[k];
                  double fs = fsum, zss = zsum;
                  if (j > i) {
                    zrow[0] = sol.z_nodes[static_cast<std::size_t>(j)][node];
                    const double fj = driver.f(t_j, State::Constant(1, x_j), phi(leaf), zrow);
                    fs += fj * dt_j;
                    zss += fj * (bsum / grid.span(i, j)) * dt_j;
                  }
                  const double pv = phi(leaf);
                  sy += w2 * (pv + fs);
                  sz += w2 * (pv * ((bsum + dw) / grid.span(i, N)) + zss);
                }
              } else {
                for (int n = 0; n < tree.n_q; ++n) {
                  const std::size_t child =
                      node * static_cast<std::size_t>(tree.n_q) + static_cast<std::size_t>(n);
                  const double dw = sq_j * tree.rule->nodes[static_cast<std::size_t>(n)];
                  const double w2 = wprod * tree.rule->weights[static_cast<std::size_t>(n)];
                  double fs = fsum, zss = zsum;
                  if (j > i) {
                    zrow[0] = sol.z_nodes[static_cast<std::size_t>(j)][node];
                    const double fj =
                        driver.f(t_j, State::Constant(1, x_j),
                                 sol.y_nodes[static_cast<std::size_t>(j) + 1][child], zrow);
                    fs += fj * dt_j;
                    zss += fj * (bsum / grid.span(i, j)) * dt_j;
                  }
                  rec(j + 1, child, w2, bsum + dw, fs, zss);
                }
              }
            };
        rec(i, p, 1.0, 0.0, 0.0, 0.0);
        zs[p] = sz;
        // Ybar_i = E_i[Phi + sum_{j >= i} f_j Delta_j]; the j = i term uses
        // the just-computed Zbar_i.
        const double t_i = grid.t(i);
        const double dt_i = grid.delta(i);
        zrow[0] = sz;
        if (i == N - 1) {
          const TerminalFan fan = terminal_fan(xs[p], trN, terminal.breakpoints,
                                               options.terminal_segment_order, options.z_max);
          for (std::size_t k = 0; k < fan.z.size(); ++k) {
            const double leaf = xs[p] + trN.mean_shift + trN.x_spread * fan.z[k];
            first += fan.w[k] * driver.f(t_i, State::Constant(1, xs[p]), phi(leaf), zrow);
          }
        } else {
          const double sq_i = std::sqrt(dt_i);
          for (int n = 0; n < tree.n_q; ++n) {
            const std::size_t child =
                p * static_cast<std::size_t>(tree.n_q) + static_cast<std::size_t>(n);
            (void)sq_i;
            first += tree.rule->weights[static_cast<std::size_t>(n)] *
                     driver.f(t_i, State::Constant(1, xs[p]),
                              sol.y_nodes[static_cast<std::size_t>(i) + 1][child], zrow);
          }
        }
        ys[p] = sy + first * dt_i;
      }
    });
  }
  return sol;
}

std::function<std::pair<double, double>(double, double)> feynman_kac_v(
    const SdeModel& model, const TerminalCondition& terminal, double T, int n_q) {
  const Coeffs c = constant_coeffs(model, "feynman_kac_v");
  auto phi_fn = terminal.phi;
  auto phi = [phi_fn](double x) { return phi_fn(State::Constant(1, x)); };
  const std::vector<double> breaks = terminal.breakpoints;
  const double b = c.b, sigma = c.sigma;
  return [phi, breaks, b, sigma, n_q, T](double t, double x) -> std::pair<double, double> {
    const double tau = T - t;
    if (!(tau > 0.0)) throw InvalidParameter("feynman_kac_v: needs t < T");
    const GaussianTransition tr{b * tau, sigma * std::sqrt(tau), std::sqrt(tau)};
    double v, inc;
    if (breaks.empty()) {
      const QuadratureRule& rule = QuadratureRule::gauss_hermite(n_q);
      v = quad_expect(rule, tr, phi, x, false);
      inc = quad_expect(rule, tr, phi, x, true);
    } else {
      v = quad_expect_split(tr, phi, x, false, breaks);
      inc = quad_expect_split(tr, phi, x, true, breaks);
    }
    // d/dx E[phi(x + b tau + sigma sqrt(tau) xi)] = E[phi * xi]/(sigma sqrt(tau)).
    const double dv = inc / (sigma * tau);
    return {v, dv};
  };
}

SmoothnessFit fractional_smoothness_fit(const SdeModel& model, const TerminalCondition& terminal,
                                        double T, const std::vector<double>& t_list, int M,
                                        std::uint64_t seed) {
  if (M < 2) throw InvalidParameter("fractional_smoothness_fit: M too small");
  SmoothnessFit out;
  auto phi = [&terminal](double x) { return terminal.phi(State::Constant(1, x)); };
  CounterRng rng(seed);

  const bool exact_inner = model.constant_coefficients && model.dim_d == 1 && model.dim_q == 1;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
    const double t = t_list[ti];
    if (!(t >= 0.0 && t < T))
      throw InvalidParameter("fractional_smoothness_fit: t_list must lie in [0,T)");
    double v2 = 0.0;
    if (exact_inner) {
      const Coeffs c = constant_coeffs(model, "fractional_smoothness_fit");
      const double tau = T - t;
      const GaussianTransition inner{c.b * tau, c.sigma * std::sqrt(tau), std::sqrt(tau)};
      auto u_t = [&](double x) {
        if (terminal.breakpoints.empty())
          return quad_expect(QuadratureRule::gauss_hermite(64), inner, phi, x, false);
        return quad_expect_split(inner, phi, x, false, terminal.breakpoints);
      };
      std::vector<double> sq(static_cast<std::size_t>(M));
      parallel_for(static_cast<std::size_t>(M), [&](std::size_t mb, std::size_t me) {
        for (std::size_t m = mb; m < me; ++m) {
          const double z1 = rng.normal(m, static_cast<std::uint32_t>(ti), 0);
          const double z2 = rng.normal(m, static_cast<std::uint32_t>(ti), 1);
          const double xt = model.x0[0] + c.b * t + c.sigma * std::sqrt(t) * z1;
          const double xT = xt + c.b * tau + c.sigma * std::sqrt(tau) * z2;
          const double diff = phi(xT) - u_t(xt);
          sq[m] = diff * diff;
        }
      });
      v2 = mean_and_se(sq).mean;
    } else {
      // Inner conditional expectation by nested Monte Carlo; the inner noise
      // inflates E[(draw - uhat)^2] by Var(uhat), which is subtracted out.
      out.used_nested_fallback = true;
      const int M_outer = std::max(64, M / 64);
      const int M_inner = 256;
      const int sub = 64;
      TimeGrid inner_grid = make_grid(T, sub, 1.0);
      int i_at_t = 0;
      while (i_at_t < inner_grid.steps && inner_grid.t(i_at_t + 1) <= t) ++i_at_t;
      std::vector<double> sq(static_cast<std::size_t>(M_outer));
      for (int m = 0; m < M_outer; ++m) {
        State x = model.x0;
        for (int k = 0; k < sub; ++k) {
          const double dt = t / sub;
          const double tk = k * dt;
          Eigen::VectorXd dw(model.dim_q);
          for (int cdim = 0; cdim < model.dim_q; ++cdim)
            dw[cdim] = std::sqrt(dt) * rng.normal(static_cast<std::uint64_t>(m),
                                                  static_cast<std::uint32_t>(k + 1000 * ti),
                                                  static_cast<std::uint32_t>(cdim));
          x = x + model.b(tk, x) * dt + model.sigma(tk, x) * dw;
        }
        auto functional = [&](const std::vector<State>& states) {
          return phi(states.back()[0]);
        };
        const MeanSe inner = nested_mc(model, inner_grid, i_at_t, x, functional, M_inner,
                                       seed ^ (0x9e3779b97f4a7c15ull + m));
        // One independent terminal draw continued from (t, x).
        State xe = x;
        for (int k = i_at_t; k < inner_grid.steps; ++k) {
          const double dt = inner_grid.delta(k);
          Eigen::VectorXd dw(model.dim_q);
          for (int cdim = 0; cdim < model.dim_q; ++cdim)
            dw[cdim] = std::sqrt(dt) * rng.normal(static_cast<std::uint64_t>(m),
                                                  static_cast<std::uint32_t>(k + 5000 * ti),
                                                  static_cast<std::uint32_t>(cdim),
                                                  RngStream::bridge);
          xe = xe + model.b(inner_grid.t(k), xe) * dt + model.sigma(inner_grid.t(k), xe) * dw;
        }
        const double diff = phi(xe[0]) - inner.mean;
        sq[static_cast<std::size_t>(m)] = diff * diff - inner.se * inner.se;
      }
      v2 = mean_and_se(sq).mean;
    }
    pts.emplace_back(T - t, v2);
  }
  out.curve = pts;

  // Slope of log V^2 on log(T - t). A curve at the rounding floor of
  // E[Phi^2] counts as degenerate (constant terminals).
  double phi2 = 0.0;
  {
    CounterRng probe(seed ^ 0xabcdefull);
    for (int m = 0; m < 256; ++m) {
      const double z = probe.normal(m, 0, 0);
      const double v = phi(model.x0[0] + z);
      phi2 += v * v;
    }
    phi2 /= 256.0;
  }
  double min_v2 = pts.empty() ? 0.0 : pts.front().second;
  for (const auto& p : pts) min_v2 = std::fmin(min_v2, p.second);
  if (!(min_v2 > 1e-16 * (1.0 + phi2)) || pts.size() < 2) {
    out.degenerate = true;
    return out;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    const double lx = std::log(p.first), ly = std::log(p.second);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(pts.size());
  out.alpha_hat = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

ReferenceSolution fine_grid_reference(const SdeModel& model, const Driver& driver,
                                      const TerminalCondition& terminal, double T, int N_ref,
                                      int M_ref, int degree, std::uint64_t seed) {
  TimeGrid grid = make_grid(T, N_ref, 0.5);
  PathBatch batch = simulate(model, grid, M_ref, seed);
  LsmcBackend backend;
  backend.basis.kind = RegressionBasis::Kind::global_polynomial;
  backend.basis.degree = degree;
  auto sol = std::make_shared<DiscreteSolution>(
      euler_scheme(model, driver, terminal, grid, Backend{backend}, &batch));
  ReferenceSolution ref;
  ref.model_name = model.name;
  ref.terminal_name = terminal.name;
  ref.driver_name = driver.name;
  ref.validity = "fine-grid-lsmc:" + model.name + ":" + terminal.name + ":" + driver.name +
                 ":N=" + std::to_string(N_ref) + ":M=" + std::to_string(M_ref);
  ref.z_singularity_exponent = (terminal.alpha - 1.0) / 2.0;
  TimeGrid g = grid;
  ref.y = [sol, g](double t, double x) {
    int i = 0;
    while (i < g.steps && g.t(i + 1) <= t) ++i;
    return sol->y_at(i, x);
  };
  ref.z = [sol, g](double t, double x) {
    int i = 0;
    while (i < g.steps - 1 && g.t(i + 1) <= t) ++i;
    return sol->z_at(i, x);
  };
  return ref;
}

}  // namespace bsde
