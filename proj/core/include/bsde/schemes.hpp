#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "bsde/condexp.hpp"
#include "bsde/grids.hpp"
#include "bsde/models.hpp"
#include "bsde/paths.hpp"

namespace bsde {

struct ReferenceSolution;

enum class SchemeTag { euler, malliavin };

// Exact Gaussian-quadrature backend (constant-coefficient models). Fitted
// functions are tabulated on a uniform state grid and interpolated by cubic
// splines; the terminal step splits the integral at the terminal condition's
// breakpoints.
struct QuadBackend {
  int n_q = 16;
  int grid_points = 4096;
  double range_sigmas = 10.0;
  int terminal_segment_order = 32;
  double z_max = 10.0;
};

struct LsmcBackend {
  RegressionBasis basis;
};

using Backend = std::variant<QuadBackend, LsmcBackend>;

struct DiscreteSolution {
  TimeGrid grid;
  SchemeTag scheme = SchemeTag::euler;
  std::vector<StateFunction> y_fn;  // indices 0..N, y_fn[N] is the terminal itself
  std::vector<StateFunction> z_fn;  // indices 0..N-1

  // Per-path values when the solution was fitted on a batch (LSMC backend).
  int M = 0;
  std::vector<double> y_path;  // M x (N+1)
  std::vector<double> z_path;  // M x N
  double y0_se = 0.0;          // standard errors of the root fits (LSMC only)
  double z0_se = 0.0;
  std::vector<std::string> warnings;

  double y_at(int i, double x) const { return y_fn[static_cast<std::size_t>(i)](x); }
  double z_at(int i, double x) const { return z_fn[static_cast<std::size_t>(i)](x); }
  double y_path_at(int m, int i) const {
    return y_path[static_cast<std::size_t>(m) * (grid.steps + 1) + i];
  }
  double z_path_at(int m, int i) const {
    return z_path[static_cast<std::size_t>(m) * grid.steps + i];
  }
};

// Backward recursion of the explicit dynamic-programming equations:
// Ybar_N = Phi(X_T), Zbar_i = E_i[Ybar_{i+1} dW_i^T]/Delta_i,
// Ybar_i = E_i[Ybar_{i+1} + f(t_i, X_i, Ybar_{i+1}, Zbar_i) Delta_i].
DiscreteSolution euler_scheme(const SdeModel& model, const Driver& driver,
                              const TerminalCondition& terminal, const TimeGrid& grid,
                              const Backend& backend, const PathBatch* batch = nullptr);

// Multi-step scheme driven by the discrete Malliavin weights:
// Ybar_i = E_i[Phi + sum_{j>=i} f(t_j, X_j, yhat_{j+1}(X_{j+1}), zhat_j(X_j)) Delta_j],
// Zbar_i = E_i[Phi H^i_N + sum_{j>i} f(t_j, .) H^i_j Delta_j].
DiscreteSolution malliavin_weights_scheme(const SdeModel& model, const Driver& driver,
                                          const TerminalCondition& terminal, const TimeGrid& grid,
                                          const Backend& backend, const PathBatch* batch = nullptr,
                                          WeightFormula formula = WeightFormula::normalized);

struct ProbeResult {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

// Monte Carlo check of the representation Z_0 = E[Phi(X_T) H^0_T +
// int f(s, X_s, Y_s, Z_s) H^0_s ds] with discrete weights on a fine grid,
// using a reference (Y, Z) along simulated paths.
ProbeResult representation_probe(const SdeModel& model, const Driver& driver,
                                 const TerminalCondition& terminal, const TimeGrid& fine_grid,
                                 int M, std::uint64_t seed, const ReferenceSolution& reference);

// Columns: index,t,mean_y,mean_z,y_at_x0,z_at_x0. Means are over paths when
// the solution is path-based, otherwise over the (Gaussian) state law.
void write_solution_csv(const DiscreteSolution& solution, const SdeModel& model,
                        std::ostream& os);

}  // namespace bsde
