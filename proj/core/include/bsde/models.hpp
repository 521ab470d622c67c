#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bsde {

using State = Eigen::VectorXd;     // forward state, dimension d
using RowVec = Eigen::RowVectorXd; // z values, dimension q
using Matrix = Eigen::MatrixXd;

// Coefficient bundle of the forward SDE dX = b dt + sigma dW.
struct SdeModel {
  std::string name;
  int dim_d = 1;
  int dim_q = 1;
  State x0;
  std::function<State(double, const State&)> b;
  std::function<Matrix(double, const State&)> sigma;          // d x q
  std::function<Matrix(double, const State&)> grad_b;         // d x d
  std::function<Matrix(int, double, const State&)> grad_sigma_col;  // d x d for column j
  double ellipticity_lb = 1.0;  // lower bound on sigma sigma^T spectra
  bool constant_coefficients = false;
  double gram_condition_threshold = 1e8;
};

struct TerminalCondition {
  std::string name;
  std::function<double(const State&)> phi;
  double alpha = 1.0;                    // fractional smoothness exponent (declared)
  std::optional<double> theta_phi;       // Hoelder exponent, when Hoelder continuous
  std::optional<double> holder_const;    // K_Phi
  bool bounded = false;
  double bound = 0.0;
  // Locations (d = 1) where phi has a kink or jump; quadrature against the raw
  // terminal splits the Gaussian integral at these points.
  std::vector<double> breakpoints;
};

struct Driver {
  std::string name;
  double horizon = 1.0;  // T; the singular factors (T-t)^... are anchored here
  std::function<double(double, const State&, double, const RowVec&)> f;
  double theta_L = 1.0;
  double theta_c = 1.0;
  double theta_X = 1.0;
  double L_f = 0.0;
  double L_X = 0.0;
  double C_f = 0.0;
  bool t_holder_half = true;
};

struct RateInputs {
  double alpha = 1.0;
  double theta_L = 1.0;
  double theta_c = 1.0;
  double beta = 1.0;
  std::optional<double> theta_phi;
};

enum class RateScheme { euler, euler_holder, malliavin };

struct RatePrediction {
  double exponent = 0.0;        // on E(N) for Euler variants, on ||Z err|| for Malliavin
  bool grid_constraint_ok = false;
  bool log_factor = false;      // ln(N)^{1/4} attaches to the N^{-1/2} branch
  double indicator_argument = 0.0;
  bool indicator_out_of_range = false;  // argument above the stated [1,3] window
};

// sigma^T (sigma sigma^T)^{-1}; the ordinary inverse when d = q.
Matrix sigma_right_inverse(const SdeModel& model, double t, const State& x);

// Componentwise clamp of z to [-L, L].
RowVec truncate(const RowVec& z, double L);

// Driver zeroed out on [T - eps, T).
Driver cut_driver(const Driver& driver, double eps);

// gamma = ((alpha/2 ^ theta_c) + theta_L/2) ^ theta_c.
double gamma_exponent(double alpha, double theta_L, double theta_c);

RatePrediction predicted_rate(RateScheme scheme, const RateInputs& in);

// f(t,x,y,z) = c (1 + |y| + |T_L(z)|^2) with clamp level C_u (T-t)^{(theta-1)/2}.
Driver quadratic_truncated_driver(double c, double C_u, double theta, double T, int dim_d);

// f(t,x,y,z) = F(t, x, v(t,x) + y, grad v(t,x) sigma(t,x) + z), the translated
// driver of the simple proxy (same terminal, zero proxy driver, same generator).
Driver proxy_driver(const Driver& base,
                    const SdeModel& model,
                    std::function<std::pair<double, RowVec>(double, const State&)> v_provider);

// ---- built-in catalog ----

SdeModel make_standard_brownian(double drift, double vol, double x0);
// b(x) = b0 tanh(x), sigma(x) = s0 + s1 tanh(x) with s0 > |s1| > 0.
SdeModel make_tanh_model(double b0, double s0, double s1, double x0);

TerminalCondition make_identity_terminal();
TerminalCondition make_capped_call(double strike, double cap);
TerminalCondition make_holder_terminal(double strike, double theta, double cap);
TerminalCondition make_indicator_terminal(double strike);

Driver make_zero_driver(double T);
// f = a y + b . z + c.
Driver make_affine_driver(double a, double bz, double c, double T);
// (C_f/(T-t)^{1-theta_c}) cos(x_1) + (L/(T-t)^{(1-theta_L)/2}) (sin(y) + truncate(z,1).1).
Driver make_local_lipschitz_driver(double C_f, double theta_c, double L, double theta_L, double T);

}  // namespace bsde
