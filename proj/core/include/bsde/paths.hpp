#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bsde/grids.hpp"
#include "bsde/models.hpp"

namespace bsde {

// Simulated forward paths on a grid with Brownian increments and, for
// state-dependent models, the tangent (flow) matrices and their inverses.
// Immutable after construction.
struct PathBatch {
  TimeGrid grid;
  SdeModel model;
  int M = 0;
  int d = 1;
  int q = 1;
  std::uint64_t seed = 0;

  std::vector<double> states;        // M x (N+1) x d
  std::vector<double> dw;            // M x N x q
  std::vector<double> tangents;      // M x (N+1) x d x d; empty when constant coefficients
  std::vector<double> inv_tangents;  // same layout

  bool stores_tangents() const { return !tangents.empty(); }

  double state_scalar(int m, int k) const {
    return states[(static_cast<std::size_t>(m) * (grid.steps + 1) + k) * d];
  }
  State state(int m, int k) const;
  double dw_scalar(int m, int k) const {
    return dw[(static_cast<std::size_t>(m) * grid.steps + k) * q];
  }
  RowVec dw_vec(int m, int k) const;
  Matrix tangent(int m, int k) const;      // identity when not stored
  Matrix inv_tangent(int m, int k) const;  // identity when not stored
};

PathBatch simulate(const SdeModel& model, const TimeGrid& grid, int M, std::uint64_t seed);

// D_{t_i} X_{t_k} = grad X_{t_k} (grad X_{t_i})^{-1} sigma(t_i, X_{t_i}) per path.
std::vector<Matrix> malliavin_derivative(const PathBatch& batch, int i, int k);

// The paper's printed discrete weight omits the sigma^{-1}(t_k, .) factor that
// the continuous weight carries; the normalized form is the default and the
// printed form stays selectable for comparison.
enum class WeightFormula { normalized, printed };

struct MalliavinWeightSet {
  int anchor = 0;
  int M = 0;
  int q = 1;
  int N = 0;
  // H^i_j for j = anchor+1 .. N, flattened as (j - anchor - 1) * M * q.
  std::vector<double> values;
  RowVec weight(int m, int j) const;
};

MalliavinWeightSet malliavin_weights(const PathBatch& batch, int i,
                                     WeightFormula formula = WeightFormula::normalized);

// Streaming form of the anchored weights: advancing from j to j+1 costs one
// increment per path, so a full anchor sweep is O(M q) memory.
class WeightAccumulator {
 public:
  WeightAccumulator(const PathBatch& batch, int anchor,
                    WeightFormula formula = WeightFormula::normalized);
  // Advances to the next index; afterwards current_j() returns j and
  // weight(m) is H^{anchor}_j.
  void advance();
  int current_j() const { return j_; }
  RowVec weight(int m) const;

 private:
  const PathBatch& batch_;
  int anchor_;
  int j_;  // weights currently held for H^{anchor}_{j_}
  WeightFormula formula_;
  std::vector<double> sums_;  // M x q running stochastic sums
};

// Fixed-layout little-endian dump: header {magic, M, N, d, q, seed}, then the
// row-major state/dw/tangent arrays.
void write_batch_binary(const PathBatch& batch, std::ostream& os);
PathBatch read_batch_binary(std::istream& is, const SdeModel& model);

}  // namespace bsde
