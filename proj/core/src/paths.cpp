#include "bsde/paths.hpp"

#include <cmath>
#include <atomic>
#include <cstring>
#include <istream>
#include <ostream>

#include "bsde/errors.hpp"
#include "bsde/rng.hpp"
#include "bsde/util.hpp"

namespace bsde {

State PathBatch::state(int m, int k) const {
  State out(d);
  const std::size_t base = (static_cast<std::size_t>(m) * (grid.steps + 1) + k) * d;
  for (int a = 0; a < d; ++a) out[a] = states[base + a];
  return out;
}

RowVec PathBatch::dw_vec(int m, int k) const {
  RowVec out(q);
  const std::size_t base = (static_cast<std::size_t>(m) * grid.steps + k) * q;
  for (int c = 0; c < q; ++c) out[c] = dw[base + c];
  return out;
}

Matrix PathBatch::tangent(int m, int k) const {
  if (!stores_tangents()) return Matrix::Identity(d, d);
  Matrix out(d, d);
  const std::size_t base = (static_cast<std::size_t>(m) * (grid.steps + 1) + k) *
                           static_cast<std::size_t>(d) * d;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) out(r, c) = tangents[base + static_cast<std::size_t>(r) * d + c];
  return out;
}

Matrix PathBatch::inv_tangent(int m, int k) const {
  if (!stores_tangents()) return Matrix::Identity(d, d);
  Matrix out(d, d);
  const std::size_t base = (static_cast<std::size_t>(m) * (grid.steps + 1) + k) *
                           static_cast<std::size_t>(d) * d;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      out(r, c) = inv_tangents[base + static_cast<std::size_t>(r) * d + c];
  return out;
}

PathBatch simulate(const SdeModel& model, const TimeGrid& grid, int M, std::uint64_t seed) {
  if (M < 1) throw InvalidParameter("simulate: M must be at least 1");
  const int N = grid.steps, d = model.dim_d, q = model.dim_q;
  PathBatch batch;
  batch.grid = grid;
  batch.model = model;
  batch.M = M;
  batch.d = d;
  batch.q = q;
  batch.seed = seed;
  batch.states.resize(static_cast<std::size_t>(M) * (N + 1) * d);
  batch.dw.resize(static_cast<std::size_t>(M) * N * q);
  const bool tang = !model.constant_coefficients;
  if (tang) {
    batch.tangents.resize(static_cast<std::size_t>(M) * (N + 1) * d * d);
    batch.inv_tangents.resize(static_cast<std::size_t>(M) * (N + 1) * d * d);
  }

  CounterRng rng(seed);
  std::atomic<bool> overflow{false}, singular{false};
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t mb, std::size_t me) {
    State x(d);
    Matrix grad(d, d), inv_grad(d, d), step(d, d);
    Eigen::VectorXd dwk(q);
    for (std::size_t m = mb; m < me; ++m) {
      x = model.x0;
      grad = Matrix::Identity(d, d);
      inv_grad = grad;
      auto put_state = [&](int k) {
        const std::size_t base = (m * (N + 1) + static_cast<std::size_t>(k)) * d;
        for (int a = 0; a < d; ++a) batch.states[base + a] = x[a];
      };
      auto put_tangent = [&](int k) {
        if (!tang) return;
        const std::size_t base =
            (m * (N + 1) + static_cast<std::size_t>(k)) * static_cast<std::size_t>(d) * d;
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c) {
            batch.tangents[base + static_cast<std::size_t>(r) * d + c] = grad(r, c);
            batch.inv_tangents[base + static_cast<std::size_t>(r) * d + c] = inv_grad(r, c);
          }
      };
      put_state(0);
      put_tangent(0);
      for (int k = 0; k < N; ++k) {
        const double t = grid.t(k);
        const double dt = grid.delta(k);
        const double sq = std::sqrt(dt);
        const std::size_t dwbase = (m * N + static_cast<std::size_t>(k)) * q;
        for (int c = 0; c < q; ++c) {
          dwk[c] = sq * rng.normal(m, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(c));
          batch.dw[dwbase + c] = dwk[c];
        }
        if (tang) {
          step = Matrix::Identity(d, d) + model.grad_b(t, x) * dt;
          for (int j = 0; j < q; ++j) step += model.grad_sigma_col(j, t, x) * dwk[j];
          grad = step * grad;
          const double det = grad.determinant();
          if (!(std::fabs(det) > 1e-14)) {
            singular.store(true);
            return;
          }
          inv_grad = grad.inverse();
        }
        x = x + model.b(t, x) * dt + model.sigma(t, x) * dwk;
        if (!x.allFinite()) {
          overflow.store(true);
          return;
        }
        put_state(k + 1);
        put_tangent(k + 1);
      }
    }
  });
  if (singular.load()) throw SingularTangent("simulate: tangent matrix numerically singular");
  if (overflow.load()) throw SimulationOverflow("simulate: non-finite state");
  return batch;
}

std::vector<Matrix> malliavin_derivative(const PathBatch& batch, int i, int k) {
  if (i < 0 || k < i || k > batch.grid.steps)
    throw IndexOutOfRange("malliavin_derivative: need 0 <= i <= k <= N");
  std::vector<Matrix> out(static_cast<std::size_t>(batch.M));
  parallel_for(static_cast<std::size_t>(batch.M), [&](std::size_t mb, std::size_t me) {
    for (std::size_t m = mb; m < me; ++m) {
      const int mi = static_cast<int>(m);
      const Matrix flow = batch.tangent(mi, k) * batch.inv_tangent(mi, i);
      out[m] = flow * batch.model.sigma(batch.grid.t(i), batch.state(mi, i));
    }
  });
  return out;
}

namespace {

// sigma^{-1}(t_k, X_k) D_{t_i} X_{t_k} for the normalized formula, or
// D_{t_i} X_{t_k} sigma(t_i, X_{t_i}) for the paper's printed one.
Matrix weight_kernel(const PathBatch& batch, int anchor, int k, int m, WeightFormula formula,
                     const Matrix& sigma_at_anchor) {
  const Matrix flow = batch.tangent(m, k) * batch.inv_tangent(m, anchor);
  const Matrix deriv = flow * sigma_at_anchor;  // D_{t_i} X_{t_k}
  if (formula == WeightFormula::printed) return deriv * sigma_at_anchor;
  return sigma_right_inverse(batch.model, batch.grid.t(k), batch.state(m, k)) * deriv;
}

}  // namespace

WeightAccumulator::WeightAccumulator(const PathBatch& batch, int anchor, WeightFormula formula)
    : batch_(batch), anchor_(anchor), j_(anchor), formula_(formula) {
  if (anchor < 0 || anchor >= batch.grid.steps)
    throw IndexOutOfRange("WeightAccumulator: anchor must be in [0, N)");
  sums_.assign(static_cast<std::size_t>(batch.M) * batch.q, 0.0);
}

void WeightAccumulator::advance() {
  if (j_ >= batch_.grid.steps) throw IndexOutOfRange("WeightAccumulator: past the horizon");
  const int k = j_;  // new stochastic-sum term covers [t_k, t_{k+1})
  const int q = batch_.q;
  parallel_for(static_cast<std::size_t>(batch_.M), [&](std::size_t mb, std::size_t me) {
    for (std::size_t m = mb; m < me; ++m) {
      const int mi = static_cast<int>(m);
      const Matrix sig_i = batch_.model.sigma(batch_.grid.t(anchor_), batch_.state(mi, anchor_));
      const Matrix ker = weight_kernel(batch_, anchor_, k, mi, formula_, sig_i);  // q x q
      const RowVec dwk = batch_.dw_vec(mi, k);
      // (ker)^T dW_k accumulated componentwise.
      for (int c = 0; c < q; ++c) {
        double acc = 0.0;
        for (int r = 0; r < q; ++r) acc += ker(r, c) * dwk[r];
        sums_[m * static_cast<std::size_t>(q) + c] += acc;
      }
    }
  });
  ++j_;
}

RowVec WeightAccumulator::weight(int m) const {
  RowVec out(batch_.q);
  const double tau = batch_.grid.span(anchor_, j_);
  for (int c = 0; c < batch_.q; ++c)
    out[c] = sums_[static_cast<std::size_t>(m) * batch_.q + c] / tau;
  return out;
}

MalliavinWeightSet malliavin_weights(const PathBatch& batch, int i, WeightFormula formula) {
  if (i < 0 || i >= batch.grid.steps)
    throw IndexOutOfRange("malliavin_weights: anchor must be in [0, N)");
  MalliavinWeightSet set;
  set.anchor = i;
  set.M = batch.M;
  set.q = batch.q;
  set.N = batch.grid.steps;
  const int count = set.N - i;
  set.values.resize(static_cast<std::size_t>(count) * batch.M * batch.q);
  WeightAccumulator acc(batch, i, formula);
  for (int j = i + 1; j <= set.N; ++j) {
    acc.advance();
    const std::size_t base =
        static_cast<std::size_t>(j - i - 1) * batch.M * batch.q;
    for (int m = 0; m < batch.M; ++m) {
      const RowVec w = acc.weight(m);
      for (int c = 0; c < batch.q; ++c)
        set.values[base + static_cast<std::size_t>(m) * batch.q + c] = w[c];
    }
  }
  return set;
}

RowVec MalliavinWeightSet::weight(int m, int j) const {
  if (j <= anchor || j > N) throw IndexOutOfRange("MalliavinWeightSet: j out of range");
  RowVec out(q);
  const std::size_t base =
      (static_cast<std::size_t>(j - anchor - 1) * M + m) * static_cast<std::size_t>(q);
  for (int c = 0; c < q; ++c) out[c] = values[base + c];
  return out;
}

namespace {
constexpr std::uint64_t kBatchMagic = 0x42534445504e4331ull;  // "BSDEPNC1"

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

void write_batch_binary(const PathBatch& batch, std::ostream& os) {
  put(os, kBatchMagic);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(batch.M));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(batch.grid.steps));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(batch.d));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(batch.q));
  put(os, batch.seed);
  put(os, batch.grid.horizon);
  put(os, batch.grid.beta);
  put<std::uint64_t>(os, batch.stores_tangents() ? 1u : 0u);
  auto dump = [&os](const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  dump(batch.states);
  dump(batch.dw);
  dump(batch.tangents);
  dump(batch.inv_tangents);
}

PathBatch read_batch_binary(std::istream& is, const SdeModel& model) {
  if (get<std::uint64_t>(is) != kBatchMagic)
    throw InvalidParameter("read_batch_binary: bad magic");
  PathBatch batch;
  batch.model = model;
  batch.M = static_cast<int>(get<std::uint64_t>(is));
  const int N = static_cast<int>(get<std::uint64_t>(is));
  batch.d = static_cast<int>(get<std::uint64_t>(is));
  batch.q = static_cast<int>(get<std::uint64_t>(is));
  batch.seed = get<std::uint64_t>(is);
  const double T = get<double>(is);
  const double beta = get<double>(is);
  batch.grid = make_grid(T, N, beta);
  const bool tang = get<std::uint64_t>(is) != 0;
  auto load = [&is](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  };
  load(batch.states, static_cast<std::size_t>(batch.M) * (N + 1) * batch.d);
  load(batch.dw, static_cast<std::size_t>(batch.M) * N * batch.q);
  if (tang) {
    load(batch.tangents, static_cast<std::size_t>(batch.M) * (N + 1) * batch.d * batch.d);
    load(batch.inv_tangents, static_cast<std::size_t>(batch.M) * (N + 1) * batch.d * batch.d);
  }
  if (!is) throw InvalidParameter("read_batch_binary: truncated stream");
  return batch;
}

}  // namespace bsde
