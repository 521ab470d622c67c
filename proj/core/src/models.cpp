#include "bsde/models.hpp"

#include <cmath>

#include "bsde/errors.hpp"

namespace bsde {

Matrix sigma_right_inverse(const SdeModel& model, double t, const State& x) {
  const Matrix s = model.sigma(t, x);
  if (!s.allFinite()) throw SimulationOverflow("sigma_right_inverse: non-finite volatility");
  const Matrix gram = s * s.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > model.gram_condition_threshold)
    throw IllConditionedVolatility("sigma_right_inverse: gram condition number " +
                                   std::to_string(lo > 0.0 ? hi / lo : 0.0) +
                                   " exceeds threshold");
  return s.transpose() * gram.inverse();
}

RowVec truncate(const RowVec& z, double L) {
  RowVec out = z;
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = std::fmax(-L, std::fmin(out[j], L));
  return out;
}

Driver cut_driver(const Driver& driver, double eps) {
  if (!(eps > 0.0 && eps < driver.horizon))
    throw InvalidParameter("cut_driver: eps must be in (0,T)");
  Driver out = driver;
  out.name = driver.name + "-cut";
  const double cutoff = driver.horizon - eps;
  auto base = driver.f;
  out.f = [base, cutoff](double t, const State& x, double y, const RowVec& z) {
    if (t >= cutoff) return 0.0;
    return base(t, x, y, z);
  };
  return out;
}

double gamma_exponent(double alpha, double theta_L, double theta_c) {
  if (!(alpha > 0.0 && alpha <= 1.0) || !(theta_L > 0.0 && theta_L <= 1.0) ||
      !(theta_c > 0.0 && theta_c <= 1.0))
    throw InvalidParameter("gamma_exponent: exponents must be in (0,1]");
  return std::fmin(std::fmin(alpha / 2.0, theta_c) + theta_L / 2.0, theta_c);
}

RatePrediction predicted_rate(RateScheme scheme, const RateInputs& in) {
  if (!(in.alpha > 0.0 && in.alpha <= 1.0) || !(in.theta_L > 0.0 && in.theta_L <= 1.0) ||
      !(in.theta_c > 0.0 && in.theta_c <= 1.0) || !(in.beta > 0.0 && in.beta <= 1.0))
    throw InvalidParameter("predicted_rate: inputs must be in (0,1]");
  if ((scheme == RateScheme::euler_holder) && !in.theta_phi)
    throw InvalidParameter("predicted_rate: missing theta_phi for the Hoelder variant");

  const double gamma = gamma_exponent(in.alpha, in.theta_L, in.theta_c);
  RatePrediction out;
  switch (scheme) {
    case RateScheme::euler: {
      out.indicator_argument = in.alpha + in.theta_L;
      out.exponent = (out.indicator_argument >= 1.0) ? 1.0 : 2.0 * gamma;
      out.grid_constraint_ok = in.beta < std::fmin(2.0 * gamma, in.alpha);
      break;
    }
    case RateScheme::euler_holder: {
      out.indicator_argument = *in.theta_phi + in.beta + 2.0 * gamma;
      out.exponent = (out.indicator_argument >= 1.0) ? 1.0 : 2.0 * gamma;
      out.grid_constraint_ok =
          in.beta < std::fmin(2.0 * gamma, std::fmin(in.alpha, in.theta_L));
      out.indicator_out_of_range = out.indicator_argument > 3.0;
      break;
    }
    case RateScheme::malliavin: {
      const double arg = in.theta_phi ? (*in.theta_phi + in.beta + 2.0 * gamma)
                                      : (in.beta + 2.0 * gamma);
      out.indicator_argument = arg;
      out.exponent = (arg >= 1.0) ? 0.5 : gamma;
      out.grid_constraint_ok =
          in.beta < std::fmin(gamma, std::fmin(in.alpha, in.theta_L));
      // The ln(N)^{1/4} factor belongs to the exponential-moments bound, whose
      // indicator argument is beta + 2 gamma regardless of Hoelder regularity.
      out.log_factor = (in.beta + 2.0 * gamma) >= 1.0;
      out.indicator_out_of_range = arg > 3.0;
      break;
    }
  }
  return out;
}

Driver quadratic_truncated_driver(double c, double C_u, double theta, double T, int dim_d) {
  if (!(c > 0.0) || !(C_u > 0.0) || !(theta > 0.0 && theta <= 1.0) || !(T > 0.0))
    throw InvalidParameter("quadratic_truncated_driver: bad parameters");
  Driver d;
  d.name = "truncated-quadratic";
  d.horizon = T;
  d.theta_c = 1.0;
  d.theta_L = theta;
  d.theta_X = 1.0;
  d.C_f = c;
  d.L_f = c * (std::pow(T, (1.0 - theta) / 2.0) + 2.0 * std::sqrt(static_cast<double>(dim_d)) * C_u);
  d.f = [c, C_u, theta, T](double t, const State&, double y, const RowVec& z) {
    const double level = C_u * std::pow(T - t, (theta - 1.0) / 2.0);
    const RowVec zt = truncate(z, level);
    return c * (1.0 + std::fabs(y) + zt.squaredNorm());
  };
  return d;
}

Driver proxy_driver(const Driver& base, const SdeModel& model,
                    std::function<std::pair<double, RowVec>(double, const State&)> v_provider) {
  Driver out = base;
  out.name = base.name + "-proxy";
  const double T = base.horizon;
  auto F = base.f;
  auto sigma = model.sigma;
  out.f = [F, sigma, v_provider, T](double t, const State& x, double y, const RowVec& z) {
    if (t >= T) throw InvalidParameter("proxy_driver: provider undefined at t >= T");
    const auto [v, grad_v] = v_provider(t, x);
    const RowVec shift = grad_v * sigma(t, x);
    return F(t, x, v + y, shift + z);
  };
  return out;
}

// ---- catalog ----

SdeModel make_standard_brownian(double drift, double vol, double x0) {
  if (!(vol > 0.0)) throw InvalidParameter("make_standard_brownian: vol must be positive");
  SdeModel m;
  m.name = "standard-brownian";
  m.dim_d = 1;
  m.dim_q = 1;
  m.x0 = State::Constant(1, x0);
  m.b = [drift](double, const State&) { return State::Constant(1, drift); };
  m.sigma = [vol](double, const State&) { return Matrix::Constant(1, 1, vol); };
  m.grad_b = [](double, const State&) { return Matrix::Zero(1, 1); };
  m.grad_sigma_col = [](int, double, const State&) { return Matrix::Zero(1, 1); };
  m.ellipticity_lb = vol * vol;
  m.constant_coefficients = true;
  return m;
}

SdeModel make_tanh_model(double b0, double s0, double s1, double x0) {
  if (!(s0 > std::fabs(s1)) || !(std::fabs(s1) > 0.0))
    throw InvalidParameter("make_tanh_model: needs s0 > |s1| > 0");
  SdeModel m;
  m.name = "tanh";
  m.dim_d = 1;
  m.dim_q = 1;
  m.x0 = State::Constant(1, x0);
  m.b = [b0](double, const State& x) { return State::Constant(1, b0 * std::tanh(x[0])); };
  m.sigma = [s0, s1](double, const State& x) {
    return Matrix::Constant(1, 1, s0 + s1 * std::tanh(x[0]));
  };
  m.grad_b = [b0](double, const State& x) {
    const double th = std::tanh(x[0]);
    return Matrix::Constant(1, 1, b0 * (1.0 - th * th));
  };
  m.grad_sigma_col = [s1](int, double, const State& x) {
    const double th = std::tanh(x[0]);
    return Matrix::Constant(1, 1, s1 * (1.0 - th * th));
  };
  const double lo = s0 - std::fabs(s1);
  m.ellipticity_lb = lo * lo;
  m.constant_coefficients = false;
  return m;
}

TerminalCondition make_identity_terminal() {
  TerminalCondition t;
  t.name = "identity";
  t.phi = [](const State& x) { return x[0]; };
  t.alpha = 1.0;
  t.theta_phi = 1.0;
  t.holder_const = 1.0;
  t.bounded = false;
  return t;
}

TerminalCondition make_capped_call(double strike, double cap) {
  if (!(cap > 0.0)) throw InvalidParameter("make_capped_call: cap must be positive");
  TerminalCondition t;
  t.name = "capped-call";
  t.phi = [strike, cap](const State& x) {
    return std::fmin(std::fmax(x[0] - strike, 0.0), cap);
  };
  t.alpha = 1.0;
  t.theta_phi = 1.0;
  t.holder_const = 1.0;
  t.bounded = true;
  t.bound = cap;
  t.breakpoints = {strike, strike + cap};
  return t;
}

TerminalCondition make_holder_terminal(double strike, double theta, double cap) {
  if (!(theta > 0.0 && theta <= 1.0) || !(cap > 0.0))
    throw InvalidParameter("make_holder_terminal: bad parameters");
  TerminalCondition t;
  t.name = "holder";
  t.phi = [strike, theta, cap](const State& x) {
    return std::fmin(std::pow(std::fabs(x[0] - strike), theta), cap);
  };
  t.alpha = theta;
  t.theta_phi = theta;
  t.holder_const = 1.0;
  t.bounded = true;
  t.bound = cap;
  t.breakpoints = {strike, strike - std::pow(cap, 1.0 / theta), strike + std::pow(cap, 1.0 / theta)};
  return t;
}

TerminalCondition make_indicator_terminal(double strike) {
  TerminalCondition t;
  t.name = "indicator";
  t.phi = [strike](const State& x) { return x[0] >= strike ? 1.0 : 0.0; };
  // Discontinuous, so no Hoelder exponent; realizes alpha = 1/2 on
  // nondegenerate models.
  t.alpha = 0.5;
  t.bounded = true;
  t.bound = 1.0;
  t.breakpoints = {strike};
  return t;
}

Driver make_zero_driver(double T) {
  Driver d;
  d.name = "zero";
  d.horizon = T;
  d.f = [](double, const State&, double, const RowVec&) { return 0.0; };
  d.theta_L = 1.0;
  d.theta_c = 1.0;
  d.theta_X = 1.0;
  return d;
}

Driver make_affine_driver(double a, double bz, double c, double T) {
  Driver d;
  d.name = "affine";
  d.horizon = T;
  d.f = [a, bz, c](double, const State&, double y, const RowVec& z) {
    return a * y + bz * z.sum() + c;
  };
  d.theta_L = 1.0;
  d.theta_c = 1.0;
  d.theta_X = 1.0;
  d.L_f = std::fabs(a) + std::fabs(bz);
  d.C_f = std::fabs(c);
  return d;
}

Driver make_local_lipschitz_driver(double C_f, double theta_c, double L, double theta_L,
                                   double T) {
  if (!(theta_c > 0.0 && theta_c <= 1.0) || !(theta_L > 0.0 && theta_L <= 1.0))
    throw InvalidParameter("make_local_lipschitz_driver: exponents must be in (0,1]");
  Driver d;
  d.name = "local-lipschitz";
  d.horizon = T;
  d.theta_c = theta_c;
  d.theta_L = theta_L;
  d.theta_X = 1.0;
  d.C_f = C_f;
  d.L_f = L;
  d.f = [C_f, theta_c, L, theta_L, T](double t, const State& x, double y, const RowVec& z) {
    const double tau = T - t;
    const double bounded_part = C_f * std::pow(tau, theta_c - 1.0) * std::cos(x[0]);
    const double lipschitz_part =
        L * std::pow(tau, (theta_L - 1.0) / 2.0) * (std::sin(y) + truncate(z, 1.0).sum());
    return bounded_part + lipschitz_part;
  };
  return d;
}

}  // namespace bsde
