#include "bsde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "bsde/condexp.hpp"
#include "bsde/errors.hpp"
#include "bsde/rng.hpp"
#include "bsde/util.hpp"

namespace bsde {

namespace {

constexpr int kChunk = 4096;

void check_reference(const ReferenceSolution& reference, const SdeModel& model,
                     const Driver& driver, const TerminalCondition& terminal) {
  if (reference.model_name != model.name || reference.driver_name != driver.name ||
      reference.terminal_name != terminal.name)
    throw ReferenceMismatch("scheme_error: reference built for (" + reference.model_name + "," +
                            reference.terminal_name + "," + reference.driver_name +
                            "), experiment is (" + model.name + "," + terminal.name + "," +
                            driver.name + ")");
}

struct WalkAccumulators {
  std::vector<double> sum_y, sumsq_y;    // per index i < N
  std::vector<double> sum_pz, sumsq_pz;  // per index i < N
  double sum_int = 0.0, sumsq_int = 0.0;
};

}  // namespace

ErrorReport scheme_error(const DiscreteSolution& solution, const ReferenceSolution& reference,
                         const SdeModel& model, const Driver& driver,
                         const TerminalCondition& terminal, int M, std::uint64_t seed,
                         int substeps, double theta_L) {
  if (substeps < 1) throw InvalidParameter("scheme_error: substeps must be at least 1");
  if (M < 2) throw InvalidParameter("scheme_error: needs at least two paths");
  if (model.dim_d != 1 || model.dim_q != 1)
    throw UnsupportedModel("scheme_error: implemented for d = q = 1");
  check_reference(reference, model, driver, terminal);

  const TimeGrid& grid = solution.grid;
  const int N = grid.steps;
  const int S = substeps;
  CounterRng rng(seed);

  WalkAccumulators acc;
  acc.sum_y.assign(static_cast<std::size_t>(N), 0.0);
  acc.sumsq_y.assign(static_cast<std::size_t>(N), 0.0);
  acc.sum_pz.assign(static_cast<std::size_t>(N), 0.0);
  acc.sumsq_pz.assign(static_cast<std::size_t>(N), 0.0);

  std::vector<double> block_y(static_cast<std::size_t>(kChunk) * N);
  std::vector<double> block_pz(static_cast<std::size_t>(kChunk) * N);
  std::vector<double> block_int(static_cast<std::size_t>(kChunk));

  for (int base = 0; base < M; base += kChunk) {
    const int count = std::min(kChunk, M - base);
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t mb, std::size_t me) {
      State xs(1);
      for (std::size_t mm = mb; mm < me; ++mm) {
        const std::uint64_t m = static_cast<std::uint64_t>(base) + mm;
        double x = model.x0[0];
        double integral = 0.0;
        for (int i = 0; i < N; ++i) {
          const double t_i = grid.t(i);
          const double dt = grid.delta(i);
          const double h = dt / S;
          const double ey = reference.y(t_i, x) - solution.y_at(i, x);
          block_y[mm * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)] = ey * ey;
          const double zhat = solution.z_at(i, x);
          const double ez0 = reference.z(t_i, x) - zhat;
          block_pz[mm * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)] = ez0 * ez0;
          // Walk t_i -> mid_0 -> ... -> mid_{S-1} -> t_{i+1}; the midpoint
          // values carry the composite rule.
          double t_cur = t_i;
          for (int s = 0; s <= S; ++s) {
            const double step = (s == 0 || s == S) ? 0.5 * h : h;
            const std::uint32_t step_id =
                static_cast<std::uint32_t>(i) * static_cast<std::uint32_t>(S + 1) +
                static_cast<std::uint32_t>(s);
            xs[0] = x;
            const double bloc = model.b(t_cur, xs)[0];
            const double sloc = model.sigma(t_cur, xs)(0, 0);
            const double dw = std::sqrt(step) * rng.normal(m, step_id, 0, RngStream::bridge);
            x += bloc * step + sloc * dw;
            t_cur += step;
            if (s < S) {
              const double ez = reference.z(t_cur, x) - zhat;
              integral += (dt / S) * ez * ez;
            }
          }
        }
        block_int[mm] = integral;
      }
    });
    for (int mm = 0; mm < count; ++mm) {
      for (int i = 0; i < N; ++i) {
        const double vy = block_y[static_cast<std::size_t>(mm) * N + static_cast<std::size_t>(i)];
        const double vz = block_pz[static_cast<std::size_t>(mm) * N + static_cast<std::size_t>(i)];
        acc.sum_y[static_cast<std::size_t>(i)] += vy;
        acc.sumsq_y[static_cast<std::size_t>(i)] += vy * vy;
        acc.sum_pz[static_cast<std::size_t>(i)] += vz;
        acc.sumsq_pz[static_cast<std::size_t>(i)] += vz * vz;
      }
      acc.sum_int += block_int[static_cast<std::size_t>(mm)];
      acc.sumsq_int += block_int[static_cast<std::size_t>(mm)] * block_int[static_cast<std::size_t>(mm)];
    }
  }

  auto se_of = [M](double sum, double sumsq) {
    const double mean = sum / M;
    const double var = std::fmax(0.0, sumsq / M - mean * mean);
    return std::sqrt(var / std::fmax(1.0, static_cast<double>(M - 1)));
  };

  ErrorReport report;
  report.N = N;
  report.beta = grid.beta;
  report.scheme = (solution.scheme == SchemeTag::euler) ? "euler" : "malliavin";
  report.sample_size = M;
  int argmax = 0;
  for (int i = 0; i < N; ++i) {
    const double mean = acc.sum_y[static_cast<std::size_t>(i)] / M;
    if (mean > report.max_y) {
      report.max_y = mean;
      argmax = i;
    }
    report.pointwise_z.push_back(acc.sum_pz[static_cast<std::size_t>(i)] / M);
    report.pointwise_z_se.push_back(
        se_of(acc.sum_pz[static_cast<std::size_t>(i)], acc.sumsq_pz[static_cast<std::size_t>(i)]));
    report.weighted_z.push_back(std::pow(grid.tail(i), 1.0 + grid.beta - theta_L) *
                                report.pointwise_z.back());
  }
  report.max_y_se = se_of(acc.sum_y[static_cast<std::size_t>(argmax)],
                          acc.sumsq_y[static_cast<std::size_t>(argmax)]);
  report.sum_z = acc.sum_int / M;
  report.sum_z_se = se_of(acc.sum_int, acc.sumsq_int);
  report.total = report.max_y + report.sum_z;
  report.total_se = std::sqrt(report.max_y_se * report.max_y_se + report.sum_z_se * report.sum_z_se);
  if (reference.validity.rfind("fine-grid", 0) == 0)
    report.reference_disclaimer =
        "reference is a fine-grid numerical solution; reported errors include its own "
        "discretization and regression error";
  return report;
}

L2Regularity l2_regularity(const ReferenceSolution& reference, const SdeModel& model,
                           const TimeGrid& grid, int M, std::uint64_t seed, int substeps,
                           int n_q) {
  if (!model.constant_coefficients || model.dim_d != 1 || model.dim_q != 1)
    throw UnsupportedModel("l2_regularity: projection implemented for constant-coefficient d=q=1");
  const int N = grid.steps, S = substeps;
  const double b = model.b(0.0, model.x0)[0];
  const double sigma = model.sigma(0.0, model.x0)(0, 0);
  const double x0 = model.x0[0];
  const QuadratureRule& rule = QuadratureRule::gauss_hermite(n_q);

  // Projected within-interval averages Ztilde_i(x), tabulated per index.
  const double span = 10.0 * std::fabs(sigma) * std::sqrt(grid.horizon);
  const double lo = x0 + std::fmin(0.0, b * grid.horizon) - span;
  const double hi = x0 + std::fmax(0.0, b * grid.horizon) + span;
  std::vector<StateFunction> ztilde(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const double dt = grid.delta(i);
    std::vector<GaussianTransition> trs;
    std::vector<double> tstars;
    for (int s = 0; s < S; ++s) {
      const double tstar = grid.t(i) + (s + 0.5) * dt / S;
      const double tau = tstar - grid.t(i);
      trs.push_back(GaussianTransition{b * tau, sigma * std::sqrt(tau), std::sqrt(tau)});
      tstars.push_back(tstar);
    }
    auto zfun = reference.z;
    ztilde[static_cast<std::size_t>(i)] = tabulate_spline(
        [&](double x) {
          double acct = 0.0;
          for (int s = 0; s < S; ++s) {
            auto g = [&](double v) { return zfun(tstars[static_cast<std::size_t>(s)], v); };
            acct += quad_expect(rule, trs[static_cast<std::size_t>(s)], g, x, false);
          }
          return acct / S;
        },
        lo, hi, 2048);
  }

  CounterRng rng(seed);
  std::vector<double> proj(static_cast<std::size_t>(M)), simple(static_cast<std::size_t>(M));
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t mb, std::size_t me) {
    for (std::size_t m = mb; m < me; ++m) {
      double x = x0;
      double acc_p = 0.0, acc_s = 0.0;
      for (int i = 0; i < N; ++i) {
        const double dt = grid.delta(i);
        const double h = dt / S;
        const double zt = ztilde[static_cast<std::size_t>(i)](x);
        const double zi = reference.z(grid.t(i), x);
        double t_cur = grid.t(i);
        for (int s = 0; s <= S; ++s) {
          const double step = (s == 0 || s == S) ? 0.5 * h : h;
          const std::uint32_t step_id =
              static_cast<std::uint32_t>(i) * static_cast<std::uint32_t>(S + 1) +
              static_cast<std::uint32_t>(s);
          const double dw = std::sqrt(step) * rng.normal(m, step_id, 0, RngStream::bridge);
          x += b * step + sigma * dw;
          t_cur += step;
          if (s < S) {
            const double zval = reference.z(t_cur, x);
            acc_p += (dt / S) * (zval - zt) * (zval - zt);
            acc_s += (dt / S) * (zval - zi) * (zval - zi);
          }
        }
      }
      proj[m] = acc_p;
      simple[m] = acc_s;
    }
  });
  const MeanSe mp = mean_and_se(proj);
  const MeanSe ms = mean_and_se(simple);
  return L2Regularity{mp.mean, mp.se, ms.mean, ms.se};
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points, bool drop_smallest) {
  std::vector<std::pair<double, double>> pts = points;
  std::sort(pts.begin(), pts.end());
  const bool dropping = drop_smallest && pts.size() > 3;
  if (dropping) pts.erase(pts.begin());
  if (pts.size() < 3) throw DegeneratePoints("fit_rate: needs at least three points");
  for (std::size_t k = 0; k + 1 < pts.size(); ++k)
    if (pts[k].first == pts[k + 1].first)
      throw DegeneratePoints("fit_rate: repeated N value " + format_full(pts[k].first));
  for (const auto& p : pts)
    if (!(p.second > 0.0)) throw DegeneratePoints("fit_rate: nonpositive error value");

  const double n = static_cast<double>(pts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    const double lx = std::log(p.first), ly = std::log(p.second);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  RateFit fit;
  fit.points = pts;
  fit.dropped_smallest = dropping;
  const double den = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ssr = 0.0, sst = 0.0;
  const double ybar = sy / n;
  for (const auto& p : pts) {
    const double ly = std::log(p.second);
    const double fitv = fit.intercept + fit.slope * std::log(p.first);
    ssr += (ly - fitv) * (ly - fitv);
    sst += (ly - ybar) * (ly - ybar);
  }
  fit.r2 = (sst > 0.0) ? 1.0 - ssr / sst : 1.0;
  if (pts.size() > 2) {
    const double sigma2 = ssr / (n - 2.0);
    fit.slope_stderr = std::sqrt(sigma2 * n / den);
  }
  return fit;
}

AprioriProfile apriori_z_check(const std::vector<double>& t, const std::vector<double>& z_sq,
                               double horizon, double theta_c, double theta_phi_or_alpha) {
  if (t.size() != z_sq.size()) throw InvalidParameter("apriori_z_check: size mismatch");
  AprioriProfile out;
  out.t = t;
  const double expo = (std::fmin(2.0 * theta_c, theta_phi_or_alpha) - 1.0) / 2.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double w = std::sqrt(std::fmax(0.0, z_sq[k])) * std::pow(horizon - t[k], -expo);
    out.weighted.push_back(w);
    out.max_weighted = std::fmax(out.max_weighted, w);
  }
  return out;
}

double gaussian_state_expectation(const SdeModel& model, double t, double horizon,
                                  const std::vector<double>& breakpoints,
                                  const std::function<double(double)>& g) {
  if (!model.constant_coefficients || model.dim_d != 1 || model.dim_q != 1)
    throw UnsupportedModel("gaussian_state_expectation: constant-coefficient d=q=1 only");
  const double b = model.b(0.0, model.x0)[0];
  const double sigma = std::fabs(model.sigma(0.0, model.x0)(0, 0));
  const double x0 = model.x0[0];
  if (t <= 0.0) return g(x0);
  const LegendreRule& gl = LegendreRule::legendre(32);
  const double mean = x0 + b * t;
  const double sd = sigma * std::sqrt(t);
  const double spike = sigma * std::sqrt(std::fmax(horizon - t, 0.0));
  const double lo_bound = mean - 10.0 * sd;
  const double hi_bound = mean + 10.0 * sd;
  std::vector<double> cuts{lo_bound, hi_bound};
  for (double k : breakpoints)
    for (double j : {-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0}) {
      const double c = k + j * spike;
      if (c > lo_bound && c < hi_bound) cuts.push_back(c);
    }
  std::sort(cuts.begin(), cuts.end());
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double lo = cuts[s], hi = cuts[s + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double x = mid + half * gl.nodes[q];
      acc += half * gl.weights[q] * normal_pdf((x - mean) / sd) / sd * g(x);
    }
  }
  return acc;
}

std::vector<double> reference_z_second_moments(const ReferenceSolution& reference,
                                               const SdeModel& model, double horizon,
                                               const std::vector<double>& breakpoints,
                                               const std::vector<double>& times) {
  std::vector<double> out;
  for (double t : times) {
    auto g = [&](double x) {
      const double z = reference.z(t, x);
      return z * z;
    };
    out.push_back(gaussian_state_expectation(model, t, horizon, breakpoints, g));
  }
  return out;
}

nlohmann::json error_report_to_json(const ErrorReport& report) {
  nlohmann::json j;
  j["N"] = report.N;
  j["beta"] = report.beta;
  j["scheme"] = report.scheme;
  j["max_y"] = report.max_y;
  j["max_y_se"] = report.max_y_se;
  j["sum_z"] = report.sum_z;
  j["sum_z_se"] = report.sum_z_se;
  j["total"] = report.total;
  j["total_se"] = report.total_se;
  j["pointwise_z"] = report.pointwise_z;
  j["pointwise_z_se"] = report.pointwise_z_se;
  j["weighted_z"] = report.weighted_z;
  j["sample_size"] = report.sample_size;
  j["reference_disclaimer"] = report.reference_disclaimer;
  return j;
}

void write_error_report_json(const ErrorReport& report, std::ostream& os) {
  os << error_report_to_json(report).dump(2) << '\n';
}

void write_error_report_csv_row(const ErrorReport& report, std::ostream& os, bool header) {
  if (header) os << "scheme,N,beta,max_y,max_y_se,sum_z,sum_z_se,total,total_se,sample_size\n";
  os << report.scheme << ',' << report.N << ',' << format_full(report.beta) << ','
     << format_full(report.max_y) << ',' << format_full(report.max_y_se) << ','
     << format_full(report.sum_z) << ',' << format_full(report.sum_z_se) << ','
     << format_full(report.total) << ',' << format_full(report.total_se) << ','
     << report.sample_size << '\n';
}

nlohmann::json rate_fit_to_json(const RateFit& fit) {
  nlohmann::json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["slope_stderr"] = fit.slope_stderr;
  j["r2"] = fit.r2;
  j["dropped_smallest"] = fit.dropped_smallest;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : fit.points) pts.push_back({p.first, p.second});
  j["points"] = pts;
  return j;
}

void write_rate_fit_json(const RateFit& fit, std::ostream& os) {
  os << rate_fit_to_json(fit).dump(2) << '\n';
}

}  // namespace bsde
