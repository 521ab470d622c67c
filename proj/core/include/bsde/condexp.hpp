#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "bsde/models.hpp"
#include "bsde/grids.hpp"
#include "bsde/util.hpp"

namespace bsde {

struct PathBatch;

// Nodes and weights for the standard Gaussian measure (probabilists'
// Gauss-Hermite), via Golub-Welsch. Weights sum to one.
struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
  static const QuadratureRule& gauss_hermite(int n);
};

// Gauss-Legendre on [-1, 1] (weights sum to two); used for piecewise
// integration against the Gaussian density around terminal kinks.
struct LegendreRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
  static const LegendreRule& legendre(int n);
};

// One-step Gaussian transition X' = x + mean_shift + x_spread * z with
// Brownian increment dW = w_spread * z, z standard normal.
struct GaussianTransition {
  double mean_shift = 0.0;
  double x_spread = 1.0;
  double w_spread = 1.0;
};

// E[g(X') | X = x], or E[g(X') dW | X = x] when increment_weighted.
double quad_expect(const QuadratureRule& rule, const GaussianTransition& tr,
                   const std::function<double(double)>& g, double x, bool increment_weighted);

// Same expectation with the z-axis split at the standardized images of
// x_breakpoints, Gauss-Legendre per segment. Accurate for piecewise-smooth g
// whose kinks/jumps sit at the breakpoints (raw terminal conditions).
double quad_expect_split(const GaussianTransition& tr, const std::function<double(double)>& g,
                         double x, bool increment_weighted,
                         const std::vector<double>& x_breakpoints, int n_per_segment = 32,
                         double z_max = 10.0);

// A fitted or exact map x -> value (state dimension 1). Immutable, cheap to
// copy, shareable across threads.
class StateFunction {
 public:
  StateFunction();  // identically zero
  static StateFunction callable(std::function<double(double)> f);
  static StateFunction constant(double c);
  // Cubic not-a-knot spline through samples on a uniform grid; linear
  // extrapolation outside [lo, hi].
  static StateFunction spline(double lo, double hi, std::vector<double> values);
  static StateFunction polynomial(double mu, double scale, std::vector<double> coeffs);
  static StateFunction local_affine(std::vector<double> edges, std::vector<double> intercepts,
                                    std::vector<double> slopes);

  double operator()(double x) const;
  bool is_zero() const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
};

// Samples f on a uniform grid and returns the interpolating spline.
StateFunction tabulate_spline(const std::function<double(double)>& f, double lo, double hi,
                              int n);

// Exact conditional expectation E_i[g(X_{t_j})] (plain) or
// E_i[g(X_{t_j}) dW_component] (brownian-increment) for constant-coefficient
// models, as a lazily evaluated state function.
enum class WeightKind { plain, brownian_increment };
StateFunction quad_project(const SdeModel& model, const TimeGrid& grid, int i, int j,
                           const StateFunction& g, WeightKind kind, int n_q = 16);

struct RegressionBasis {
  enum class Kind { global_polynomial, local_affine };
  Kind kind = Kind::global_polynomial;
  int degree = 3;        // global polynomial degree
  int cells = 8;         // equal-mass cells for the local-affine basis
  double ridge = -1.0;   // < 0 selects the numerical-floor default
};

struct LsmcFitResult {
  StateFunction fn;
  // Gaussian standard error of the fitted value at x (OLS formula).
  std::function<double(double)> prediction_se;
  double ridge_used = 0.0;
};

// Ridge-regularized least squares of targets on basis features of X_{t_i}.
LsmcFitResult lsmc_fit_full(const PathBatch& batch, int i, const std::vector<double>& targets,
                            const RegressionBasis& basis);
StateFunction lsmc_fit(const PathBatch& batch, int i, const std::vector<double>& targets,
                       const RegressionBasis& basis);

// Plain nested Monte Carlo realization of E_i[.]: re-simulates M_inner
// sub-paths from (t_i, x). The functional sees the states at indices i..N.
MeanSe nested_mc(const SdeModel& model, const TimeGrid& grid, int i, const State& x,
                 const std::function<double(const std::vector<State>&)>& functional, int M_inner,
                 std::uint64_t seed);

}  // namespace bsde
