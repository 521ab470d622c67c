#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bsde/grids.hpp"
#include "bsde/models.hpp"
#include "bsde/schemes.hpp"

namespace bsde {

// Ground-truth (y, z) callbacks for a model/terminal/driver combination.
struct ReferenceSolution {
  std::string model_name;
  std::string terminal_name;
  std::string driver_name;
  std::string validity;
  std::function<double(double, double)> y;  // (t, x)
  std::function<double(double, double)> z;
  double z_singularity_exponent = 0.0;  // (alpha - 1)/2 blow-up of z near T
};

// Bachelier-type closed forms on constant-coefficient models for the
// identity, capped-call and indicator terminals under the zero driver or the
// affine driver a y + c.
ReferenceSolution closed_form(const SdeModel& model, const TerminalCondition& terminal,
                              const Driver& driver);

struct DpOptions {
  int n_q = 8;
  int terminal_segment_order = 32;
  double z_max = 10.0;
  std::uint64_t node_budget = 2'000'000'000;  // path-step visits
};

// Per-level node values of the discrete scheme evaluated exactly (to
// quadrature precision) on the full non-recombining Gaussian tree.
struct DpSolution {
  std::vector<std::vector<double>> states;   // level i: n_q^i states, i = 0..N-1
  std::vector<std::vector<double>> y_nodes;  // same shape
  std::vector<std::vector<double>> z_nodes;
  double y_root() const { return y_nodes[0][0]; }
  double z_root() const { return z_nodes[0][0]; }
};

DpSolution brute_force_dp(const SdeModel& model, const Driver& driver,
                          const TerminalCondition& terminal, const TimeGrid& grid,
                          SchemeTag scheme, const DpOptions& options = {});

// v(t, x) = E[Phi(X_T) | X_t = x] and its x-gradient (likelihood-ratio form),
// for constant-coefficient models.
std::function<std::pair<double, double>(double, double)> feynman_kac_v(
    const SdeModel& model, const TerminalCondition& terminal, double T, int n_q = 32);

struct SmoothnessFit {
  double alpha_hat = 0.0;
  std::vector<std::pair<double, double>> curve;  // (T - t, V^2 estimate)
  bool degenerate = false;
  bool used_nested_fallback = false;
};

// Estimates V_{t,T}(Phi)^2 = E|Phi(X_T) - E_t[Phi(X_T)]|^2 over t_list and
// fits alpha as the slope of log V^2 against log(T - t).
SmoothnessFit fractional_smoothness_fit(const SdeModel& model, const TerminalCondition& terminal,
                                        double T, const std::vector<double>& t_list, int M,
                                        std::uint64_t seed);

// Fine-grid LSMC Euler solution wrapped as a reference, for models without a
// closed form. Carries its provenance in `validity`; error reports against it
// must keep the reference-error disclaimer.
ReferenceSolution fine_grid_reference(const SdeModel& model, const Driver& driver,
                                      const TerminalCondition& terminal, double T, int N_ref,
                                      int M_ref, int degree, std::uint64_t seed);

}  // namespace bsde
