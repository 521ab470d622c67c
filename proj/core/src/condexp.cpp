#include "bsde/condexp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "bsde/errors.hpp"
#include "bsde/paths.hpp"
#include "bsde/rng.hpp"

namespace bsde {

namespace {

// Golub-Welsch for a symmetric Jacobi matrix with zero diagonal.
void golub_welsch(const std::vector<double>& offdiag, std::vector<double>& nodes,
                  std::vector<double>& weights, double weight_total) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) {
    jacobi(k, k + 1) = offdiag[static_cast<std::size_t>(k)];
    jacobi(k + 1, k) = offdiag[static_cast<std::size_t>(k)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    nodes[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
    const double v0 = es.eigenvectors()(0, k);
    weights[static_cast<std::size_t>(k)] = weight_total * v0 * v0;
  }
}

void symmetrize(std::vector<double>& nodes, std::vector<double>& weights, double weight_total) {
  const int n = static_cast<int>(nodes.size());
  for (int k = 0; k < n / 2; ++k) {
    const int m = n - 1 - k;
    const double mag = 0.5 * (std::fabs(nodes[k]) + std::fabs(nodes[m]));
    nodes[k] = -mag;
    nodes[m] = mag;
    const double w = 0.5 * (weights[k] + weights[m]);
    weights[k] = w;
    weights[m] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w *= weight_total / total;
}

}  // namespace

const QuadratureRule& QuadratureRule::gauss_hermite(int n) {
  if (n < 1) throw InvalidParameter("gauss_hermite: order must be positive");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  QuadratureRule rule;
  rule.order = n;
  std::vector<double> off(static_cast<std::size_t>(n - 1));
  for (int k = 1; k < n; ++k) off[static_cast<std::size_t>(k - 1)] = std::sqrt(static_cast<double>(k));
  golub_welsch(off, rule.nodes, rule.weights, 1.0);
  symmetrize(rule.nodes, rule.weights, 1.0);
  return cache.emplace(n, std::move(rule)).first->second;
}

const LegendreRule& LegendreRule::legendre(int n) {
  if (n < 1) throw InvalidParameter("legendre: order must be positive");
  static std::map<int, LegendreRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  LegendreRule rule;
  rule.order = n;
  std::vector<double> off(static_cast<std::size_t>(n - 1));
  for (int k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    off[static_cast<std::size_t>(k - 1)] = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  golub_welsch(off, rule.nodes, rule.weights, 2.0);
  symmetrize(rule.nodes, rule.weights, 2.0);
  return cache.emplace(n, std::move(rule)).first->second;
}

double quad_expect(const QuadratureRule& rule, const GaussianTransition& tr,
                   const std::function<double(double)>& g, double x, bool increment_weighted) {
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double z = rule.nodes[k];
    double v = g(x + tr.mean_shift + tr.x_spread * z);
    if (increment_weighted) v *= tr.w_spread * z;
    acc += rule.weights[k] * v;
  }
  return acc;
}

double quad_expect_split(const GaussianTransition& tr, const std::function<double(double)>& g,
                         double x, bool increment_weighted,
                         const std::vector<double>& x_breakpoints, int n_per_segment,
                         double z_max) {
  // Standardize the breakpoints and keep those inside the mass window.
  std::vector<double> cuts;
  cuts.push_back(-z_max);
  for (double bp : x_breakpoints) {
    const double z = (bp - x - tr.mean_shift) / tr.x_spread;
    if (z > -z_max && z < z_max) cuts.push_back(z);
  }
  cuts.push_back(z_max);
  std::sort(cuts.begin(), cuts.end());
  const LegendreRule& gl = LegendreRule::legendre(n_per_segment);
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    if (!(b > a)) continue;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double z = mid + half * gl.nodes[k];
      double v = g(x + tr.mean_shift + tr.x_spread * z);
      if (increment_weighted) v *= tr.w_spread * z;
      acc += half * gl.weights[k] * normal_pdf(z) * v;
    }
  }
  return acc;
}

// ---- StateFunction ----

struct StateFunction::Impl {
  virtual ~Impl() = default;
  virtual double eval(double x) const = 0;
};

namespace {

struct ZeroImpl : StateFunction::Impl {
  double eval(double) const override { return 0.0; }
};

struct CallableImpl : StateFunction::Impl {
  std::function<double(double)> f;
  double eval(double x) const override { return f(x); }
};

struct ConstantImpl : StateFunction::Impl {
  double c;
  double eval(double) const override { return c; }
};

struct SplineImpl : StateFunction::Impl {
  double lo = 0.0, h = 1.0;
  int n = 0;
  std::vector<double> y;  // values
  std::vector<double> m;  // second derivatives
  double left_slope = 0.0, right_slope = 0.0;

  double eval(double x) const override {
    const double hi = lo + h * (n - 1);
    if (x <= lo) return y.front() + left_slope * (x - lo);
    if (x >= hi) return y.back() + right_slope * (x - hi);
    int i = static_cast<int>((x - lo) / h);
    if (i > n - 2) i = n - 2;
    const double xl = lo + h * i;
    const double t = x - xl;
    const double u = h - t;
    const std::size_t si = static_cast<std::size_t>(i);
    // Hermite form of the natural cubic pieces from values and curvatures.
    return (m[si] * u * u * u + m[si + 1] * t * t * t) / (6.0 * h) +
           (y[si] / h - m[si] * h / 6.0) * u + (y[si + 1] / h - m[si + 1] * h / 6.0) * t;
  }
};

struct PolyImpl : StateFunction::Impl {
  double mu = 0.0, scale = 1.0;
  std::vector<double> coeffs;
  double eval(double x) const override {
    const double u = (x - mu) / scale;
    double acc = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * u + coeffs[k];
    return acc;
  }
};

struct LocalAffineImpl : StateFunction::Impl {
  std::vector<double> edges;  // interior cell edges, ascending
  std::vector<double> intercepts, slopes;
  double eval(double x) const override {
    const std::size_t cell = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
    return intercepts[cell] + slopes[cell] * x;
  }
};

}  // namespace

StateFunction::StateFunction() : impl_(std::make_shared<ZeroImpl>()) {}

StateFunction StateFunction::callable(std::function<double(double)> f) {
  auto impl = std::make_shared<CallableImpl>();
  impl->f = std::move(f);
  StateFunction s;
  s.impl_ = impl;
  return s;
}

StateFunction StateFunction::constant(double c) {
  auto impl = std::make_shared<ConstantImpl>();
  impl->c = c;
  StateFunction s;
  s.impl_ = impl;
  return s;
}

StateFunction StateFunction::spline(double lo, double hi, std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  if (n < 2 || !(hi > lo)) throw InvalidParameter("StateFunction::spline: bad grid");
  auto impl = std::make_shared<SplineImpl>();
  impl->lo = lo;
  impl->h = (hi - lo) / (n - 1);
  impl->n = n;
  impl->y = std::move(values);
  impl->m.assign(static_cast<std::size_t>(n), 0.0);
  const auto& y = impl->y;
  auto& m = impl->m;
  const double h = impl->h;
  if (n >= 4) {
    // Not-a-knot on a uniform grid. The fringe conditions decouple m_1 and
    // m_{n-2}; the interior is a Thomas solve.
    const double h2 = h * h;
    m[1] = (y[0] - 2.0 * y[1] + y[2]) / h2;
    m[static_cast<std::size_t>(n - 2)] =
        (y[static_cast<std::size_t>(n - 3)] - 2.0 * y[static_cast<std::size_t>(n - 2)] +
         y[static_cast<std::size_t>(n - 1)]) /
        h2;
    const int inner = n - 4;  // unknowns m_2 .. m_{n-3}
    if (inner > 0) {
      std::vector<double> diag(static_cast<std::size_t>(inner), 4.0);
      std::vector<double> rhs(static_cast<std::size_t>(inner));
      for (int i = 0; i < inner; ++i) {
        const std::size_t j = static_cast<std::size_t>(i + 2);  // global index
        rhs[static_cast<std::size_t>(i)] = 6.0 * (y[j - 1] - 2.0 * y[j] + y[j + 1]) / h2;
      }
      rhs[0] -= m[1];
      rhs[static_cast<std::size_t>(inner - 1)] -= m[static_cast<std::size_t>(n - 2)];
      for (int i = 1; i < inner; ++i) {
        const double w = 1.0 / diag[static_cast<std::size_t>(i - 1)];
        diag[static_cast<std::size_t>(i)] -= w;
        rhs[static_cast<std::size_t>(i)] -= w * rhs[static_cast<std::size_t>(i - 1)];
      }
      m[static_cast<std::size_t>(inner + 1)] =
          rhs[static_cast<std::size_t>(inner - 1)] / diag[static_cast<std::size_t>(inner - 1)];
      for (int i = inner - 2; i >= 0; --i) {
        m[static_cast<std::size_t>(i + 2)] =
            (rhs[static_cast<std::size_t>(i)] - m[static_cast<std::size_t>(i + 3)]) /
            diag[static_cast<std::size_t>(i)];
      }
    }
    m[0] = 2.0 * m[1] - m[2];
    m[static_cast<std::size_t>(n - 1)] =
        2.0 * m[static_cast<std::size_t>(n - 2)] - m[static_cast<std::size_t>(n - 3)];
  }
  impl->left_slope = (y[1] - y[0]) / h - h * (2.0 * m[0] + m[1]) / 6.0;
  impl->right_slope = (y[static_cast<std::size_t>(n - 1)] - y[static_cast<std::size_t>(n - 2)]) / h +
                      h * (2.0 * m[static_cast<std::size_t>(n - 1)] +
                           m[static_cast<std::size_t>(n - 2)]) /
                          6.0;
  StateFunction s;
  s.impl_ = impl;
  return s;
}

StateFunction StateFunction::polynomial(double mu, double scale, std::vector<double> coeffs) {
  auto impl = std::make_shared<PolyImpl>();
  impl->mu = mu;
  impl->scale = scale;
  impl->coeffs = std::move(coeffs);
  StateFunction s;
  s.impl_ = impl;
  return s;
}

StateFunction StateFunction::local_affine(std::vector<double> edges,
                                          std::vector<double> intercepts,
                                          std::vector<double> slopes) {
  if (intercepts.size() != edges.size() + 1 || slopes.size() != intercepts.size())
    throw InvalidParameter("StateFunction::local_affine: inconsistent sizes");
  auto impl = std::make_shared<LocalAffineImpl>();
  impl->edges = std::move(edges);
  impl->intercepts = std::move(intercepts);
  impl->slopes = std::move(slopes);
  StateFunction s;
  s.impl_ = impl;
  return s;
}

double StateFunction::operator()(double x) const { return impl_->eval(x); }

bool StateFunction::is_zero() const { return dynamic_cast<const ZeroImpl*>(impl_.get()) != nullptr; }

StateFunction tabulate_spline(const std::function<double(double)>& f, double lo, double hi,
                              int n) {
  std::vector<double> vals(static_cast<std::size_t>(n));
  const double h = (hi - lo) / (n - 1);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) vals[k] = f(lo + h * static_cast<double>(k));
  });
  return StateFunction::spline(lo, hi, std::move(vals));
}

namespace {

void require_constant_coefficients(const SdeModel& model, const char* who) {
  if (!model.constant_coefficients)
    throw UnsupportedModel(std::string(who) + ": needs a constant-coefficient model");
  if (model.dim_d != 1 || model.dim_q != 1)
    throw UnsupportedModel(std::string(who) + ": implemented for d = q = 1");
}

}  // namespace

StateFunction quad_project(const SdeModel& model, const TimeGrid& grid, int i, int j,
                           const StateFunction& g, WeightKind kind, int n_q) {
  require_constant_coefficients(model, "quad_project");
  if (i < 0 || j <= i || j > grid.steps) throw IndexOutOfRange("quad_project: need 0 <= i < j <= N");
  const double tau = grid.span(i, j);
  const double b = model.b(0.0, model.x0)[0];
  const double s = model.sigma(0.0, model.x0)(0, 0);
  GaussianTransition tr{b * tau, s * std::sqrt(tau), std::sqrt(tau)};
  const QuadratureRule& rule = QuadratureRule::gauss_hermite(n_q);
  const bool inc = (kind == WeightKind::brownian_increment);
  StateFunction gc = g;
  return StateFunction::callable([rule, tr, gc, inc](double x) {
    return quad_expect(rule, tr, [&gc](double v) { return gc(v); }, x, inc);
  });
}

// ---- LSMC ----

LsmcFitResult lsmc_fit_full(const PathBatch& batch, int i, const std::vector<double>& targets,
                            const RegressionBasis& basis) {
  if (batch.d != 1) throw UnsupportedModel("lsmc_fit: regression bases implemented for d = 1");
  const int M = batch.M;
  if (static_cast<int>(targets.size()) != M)
    throw InvalidParameter("lsmc_fit: targets size must equal path count");

  std::vector<double> xs(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) xs[static_cast<std::size_t>(m)] = batch.state_scalar(m, i);
  double xmin = xs[0], xmax = xs[0], xsum = 0.0;
  for (double v : xs) {
    xmin = std::fmin(xmin, v);
    xmax = std::fmax(xmax, v);
    xsum += v;
  }
  const double mu = xsum / M;

  // Degenerate design (e.g. t_0, where the state is a point mass): the
  // conditional expectation is the plain mean.
  if (!(xmax - xmin > 1e-12 * (1.0 + std::fabs(mu)))) {
    MeanSe ms = mean_and_se(targets);
    LsmcFitResult out;
    out.fn = StateFunction::constant(ms.mean);
    out.prediction_se = [se = ms.se](double) { return se; };
    return out;
  }

  double var = 0.0;
  for (double v : xs) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / M);

  // Feature matrix.
  std::vector<double> edges;
  int p = 0;
  const bool poly = (basis.kind == RegressionBasis::Kind::global_polynomial);
  if (poly) {
    p = basis.degree + 1;
  } else {
    if (basis.cells < 1) throw InvalidParameter("lsmc_fit: needs at least one cell");
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    for (int c = 1; c < basis.cells; ++c) {
      const std::size_t q = static_cast<std::size_t>(
          (static_cast<double>(c) / basis.cells) * (M - 1));
      edges.push_back(sorted[q]);
    }
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    p = 2 * (static_cast<int>(edges.size()) + 1);
  }
  if (M < p) throw RankDeficientDesign("lsmc_fit: fewer paths than basis functions");

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(M, p);
  for (int m = 0; m < M; ++m) {
    const double x = xs[static_cast<std::size_t>(m)];
    if (poly) {
      const double u = (x - mu) / sd;
      double pw = 1.0;
      for (int k = 0; k < p; ++k) {
        X(m, k) = pw;
        pw *= u;
      }
    } else {
      const std::size_t cell = static_cast<std::size_t>(
          std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
      X(m, static_cast<Eigen::Index>(2 * cell)) = 1.0;
      X(m, static_cast<Eigen::Index>(2 * cell + 1)) = x;
    }
  }
  Eigen::VectorXd y(M);
  for (int m = 0; m < M; ++m) y[m] = targets[static_cast<std::size_t>(m)];

  double lambda = basis.ridge;
  if (lambda < 0.0) {
    // Numerical floor, not statistical regularization.
    lambda = 1e-10 * X.colwise().squaredNorm().sum() / p;
  }

  Eigen::VectorXd beta;
  Eigen::MatrixXd R;  // upper-triangular factor of the augmented design
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p) throw RankDeficientDesign("lsmc_fit: singular normal matrix at ridge 0");
    beta = qr.solve(y);
    Eigen::MatrixXd Rfull = qr.matrixR().topRows(p).triangularView<Eigen::Upper>();
    R = Rfull * qr.colsPermutation().transpose();
  } else {
    Eigen::MatrixXd A(M + p, p);
    A.topRows(M) = X;
    A.bottomRows(p) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(M + p);
    b.head(M) = y;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    beta = qr.solve(b);
    R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  }

  const Eigen::VectorXd resid = y - X * beta;
  const double dof = std::max(1.0, static_cast<double>(M - p));
  const double sigma2 = resid.squaredNorm() / dof;

  LsmcFitResult out;
  out.ridge_used = lambda;
  if (poly) {
    std::vector<double> coeffs(beta.data(), beta.data() + p);
    out.fn = StateFunction::polynomial(mu, sd, std::move(coeffs));
  } else {
    std::vector<double> intercepts, slopes;
    for (int c = 0; c <= static_cast<int>(edges.size()); ++c) {
      intercepts.push_back(beta[2 * c]);
      slopes.push_back(beta[2 * c + 1]);
    }
    out.fn = StateFunction::local_affine(edges, std::move(intercepts), std::move(slopes));
  }
  auto Rshared = std::make_shared<Eigen::MatrixXd>(R);
  out.prediction_se = [Rshared, sigma2, poly, mu, sd, edges, p](double x) {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(p);
    if (poly) {
      const double u = (x - mu) / sd;
      double pw = 1.0;
      for (int k = 0; k < p; ++k) {
        phi[k] = pw;
        pw *= u;
      }
    } else {
      const std::size_t cell = static_cast<std::size_t>(
          std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
      phi[static_cast<Eigen::Index>(2 * cell)] = 1.0;
      phi[static_cast<Eigen::Index>(2 * cell + 1)] = x;
    }
    const Eigen::VectorXd v = Rshared->transpose().triangularView<Eigen::Lower>().solve(phi);
    return std::sqrt(sigma2 * v.squaredNorm());
  };
  return out;
}

StateFunction lsmc_fit(const PathBatch& batch, int i, const std::vector<double>& targets,
                       const RegressionBasis& basis) {
  return lsmc_fit_full(batch, i, targets, basis).fn;
}

MeanSe nested_mc(const SdeModel& model, const TimeGrid& grid, int i, const State& x,
                 const std::function<double(const std::vector<State>&)>& functional, int M_inner,
                 std::uint64_t seed) {
  if (M_inner < 2) throw InvalidParameter("nested_mc: M_inner must be at least 2");
  if (i < 0 || i > grid.steps) throw IndexOutOfRange("nested_mc: bad time index");
  CounterRng rng(seed);
  const int d = model.dim_d, q = model.dim_q;
  std::vector<double> values(static_cast<std::size_t>(M_inner));
  parallel_for(static_cast<std::size_t>(M_inner), [&](std::size_t mb, std::size_t me) {
    std::vector<State> path(static_cast<std::size_t>(grid.steps - i) + 1);
    for (std::size_t m = mb; m < me; ++m) {
      State cur = x;
      path[0] = cur;
      for (int k = i; k < grid.steps; ++k) {
        const double dt = grid.delta(k);
        const double sq = std::sqrt(dt);
        Eigen::VectorXd dw(q);
        for (int c = 0; c < q; ++c)
          dw[c] = sq * rng.normal(m, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(c),
                                  RngStream::nested);
        cur = cur + model.b(grid.t(k), cur) * dt + model.sigma(grid.t(k), cur) * dw;
        if (!cur.allFinite()) throw SimulationOverflow("nested_mc: state overflow");
        path[static_cast<std::size_t>(k - i) + 1] = cur;
      }
      values[m] = functional(path);
    }
  });
  (void)d;
  return mean_and_se(values);
}

}  // namespace bsde
