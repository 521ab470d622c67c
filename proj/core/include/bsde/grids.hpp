#pragma once

#include <iosfwd>
#include <vector>

namespace bsde {

// The graded partition t_i = T - T(1 - i/N)^{1/beta} of [0, T].
// `tails` holds T - t_i at full relative precision; near T the plain points
// lose digits to cancellation, so all time differences inside the library are
// taken from the tails.
struct TimeGrid {
  double horizon = 0.0;  // T
  int steps = 0;         // N
  double beta = 1.0;
  std::vector<double> points;      // t_0 .. t_N
  std::vector<double> increments;  // Delta_i = t_{i+1} - t_i, i = 0 .. N-1
  std::vector<double> tails;       // T - t_i, i = 0 .. N

  int size() const { return steps; }
  double t(int i) const { return points[static_cast<std::size_t>(i)]; }
  double delta(int i) const { return increments[static_cast<std::size_t>(i)]; }
  double tail(int i) const { return tails[static_cast<std::size_t>(i)]; }
  // t_j - t_i for i <= j, computed from the tails.
  double span(int i, int j) const { return tail(i) - tail(j); }
};

TimeGrid make_grid(double T, int N, double beta);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double margin() const { return rhs - lhs; }
};

// max_k Delta_k / (T - t_k)^{1-theta} over k = 0 .. N-1.
double grid_theta_bound(const TimeGrid& grid, double theta);
// The proven ceiling (T^theta / beta) N^{-(1 ^ theta/beta)}.
double grid_theta_bound_limit(const TimeGrid& grid, double theta);
BoundCheck check_theta_bound(const TimeGrid& grid, double theta);

// max_k Delta_k / Delta_{k+1} over k = 0 .. N-2. Requires N >= 2.
double grid_ratio_bound(const TimeGrid& grid);
// The constant (1/beta)(1 v (1/(2 beta))^{1/beta - 1}) stated for the step
// ratio. Measurements show it is exceeded for moderate beta (see tests), so
// callers should treat the pair (measured, stated) as a report, not an assert.
double grid_ratio_bound_limit(double beta);

// Euler Beta value B(delta, rho) for delta, rho in (0, 1], via log-Gamma.
double beta_constant(double delta, double rho);

// lhs = sum_{j=i+1}^{k-1} (t_k - t_j)^{delta-1} (t_j - t_i)^{rho-1} Delta_j,
// rhs = 2 B(delta, rho) (t_k - t_i)^{delta+rho-1}.
BoundCheck check_discrete_kernel_bound(const TimeGrid& grid, double delta, double rho, int i,
                                       int k);

// Columns: index,t,delta (delta of the final row is 0).
void write_grid_csv(const TimeGrid& grid, std::ostream& os);

}  // namespace bsde
