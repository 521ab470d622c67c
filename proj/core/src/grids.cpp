#include "bsde/grids.hpp"

#include <cmath>
#include <ostream>

#include "bsde/errors.hpp"
#include "bsde/util.hpp"

namespace bsde {

TimeGrid make_grid(double T, int N, double beta) {
  if (!(T > 0.0)) throw InvalidParameter("make_grid: T must be positive");
  if (N < 1) throw InvalidParameter("make_grid: N must be at least 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw InvalidParameter("make_grid: beta must be in (0,1]");

  TimeGrid grid;
  grid.horizon = T;
  grid.steps = N;
  grid.beta = beta;
  grid.tails.resize(static_cast<std::size_t>(N) + 1);
  grid.points.resize(static_cast<std::size_t>(N) + 1);
  grid.increments.resize(static_cast<std::size_t>(N));

  const double inv_beta = 1.0 / beta;
  for (int i = 0; i <= N; ++i) {
    double tail;
    if (i == 0) {
      tail = T;
    } else if (i == N) {
      tail = 0.0;  // t_N = T by assignment, not by formula
    } else if (beta == 1.0) {
      tail = T * (static_cast<double>(N - i) / N);
    } else {
      // (1 - i/N)^{1/beta} through exp/log1p keeps full relative precision of
      // the tail even when t_i is within an ulp of T.
      tail = T * std::exp(inv_beta * std::log1p(-static_cast<double>(i) / N));
    }
    grid.tails[static_cast<std::size_t>(i)] = tail;
    grid.points[static_cast<std::size_t>(i)] = (i == 0) ? 0.0 : T - tail;
  }
  for (int i = 0; i < N; ++i) {
    grid.increments[static_cast<std::size_t>(i)] =
        (beta == 1.0) ? T / N : grid.tails[static_cast<std::size_t>(i)] -
                                    grid.tails[static_cast<std::size_t>(i) + 1];
  }
  for (int i = 0; i < N; ++i) {
    if (!(grid.tails[static_cast<std::size_t>(i)] > grid.tails[static_cast<std::size_t>(i) + 1]))
      throw InvalidParameter("make_grid: grid degenerates in double precision for these (T,N,beta)");
  }
  return grid;
}

double grid_theta_bound(const TimeGrid& grid, double theta) {
  if (!(theta > 0.0 && theta <= 1.0))
    throw InvalidParameter("grid_theta_bound: theta must be in (0,1]");
  double best = 0.0;
  for (int k = 0; k < grid.steps; ++k) {
    const double r = grid.delta(k) / std::pow(grid.tail(k), 1.0 - theta);
    if (r > best) best = r;
  }
  return best;
}

double grid_theta_bound_limit(const TimeGrid& grid, double theta) {
  if (!(theta > 0.0 && theta <= 1.0))
    throw InvalidParameter("grid_theta_bound_limit: theta must be in (0,1]");
  const double expo = std::fmin(1.0, theta / grid.beta);
  return (std::pow(grid.horizon, theta) / grid.beta) *
         std::pow(static_cast<double>(grid.steps), -expo);
}

BoundCheck check_theta_bound(const TimeGrid& grid, double theta) {
  BoundCheck c;
  c.lhs = grid_theta_bound(grid, theta);
  c.rhs = grid_theta_bound_limit(grid, theta);
  c.holds = c.lhs <= c.rhs;
  return c;
}

double grid_ratio_bound(const TimeGrid& grid) {
  if (grid.steps < 2) throw InvalidParameter("grid_ratio_bound: needs N >= 2");
  double best = 0.0;
  for (int k = 0; k + 1 < grid.steps; ++k) {
    const double r = grid.delta(k) / grid.delta(k + 1);
    if (r > best) best = r;
  }
  return best;
}

double grid_ratio_bound_limit(double beta) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw InvalidParameter("grid_ratio_bound_limit: beta must be in (0,1]");
  const double a = std::pow(1.0 / (2.0 * beta), 1.0 / beta - 1.0);
  return (1.0 / beta) * std::fmax(1.0, a);
}

double beta_constant(double delta, double rho) {
  if (!(delta > 0.0 && delta <= 1.0) || !(rho > 0.0 && rho <= 1.0))
    throw InvalidParameter("beta_constant: arguments must be in (0,1]");
  return std::exp(std::lgamma(delta) + std::lgamma(rho) - std::lgamma(delta + rho));
}

BoundCheck check_discrete_kernel_bound(const TimeGrid& grid, double delta, double rho, int i,
                                       int k) {
  if (!(delta > 0.0 && delta <= 1.0) || !(rho > 0.0 && rho <= 1.0))
    throw InvalidParameter("check_discrete_kernel_bound: exponents must be in (0,1]");
  if (i < 0 || k > grid.steps || i >= k)
    throw IndexOutOfRange("check_discrete_kernel_bound: need 0 <= i < k <= N");
  double lhs = 0.0;
  for (int j = i + 1; j < k; ++j) {
    lhs += std::pow(grid.span(j, k), delta - 1.0) * std::pow(grid.span(i, j), rho - 1.0) *
           grid.delta(j);
  }
  BoundCheck c;
  c.lhs = lhs;
  c.rhs = 2.0 * beta_constant(delta, rho) * std::pow(grid.span(i, k), delta + rho - 1.0);
  c.holds = c.lhs <= c.rhs;
  return c;
}

void write_grid_csv(const TimeGrid& grid, std::ostream& os) {
  os << "index,t,delta\n";
  for (int i = 0; i <= grid.steps; ++i) {
    const double d = (i < grid.steps) ? grid.delta(i) : 0.0;
    os << i << ',' << format_full(grid.t(i)) << ',' << format_full(d) << '\n';
  }
}

}  // namespace bsde
