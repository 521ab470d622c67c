#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsde/oracle.hpp"
#include "bsde/schemes.hpp"

namespace bsde {

// E(N) decomposition against a reference, with standard errors.
struct ErrorReport {
  int N = 0;
  double beta = 1.0;
  std::string scheme;
  double max_y = 0.0;
  double max_y_se = 0.0;
  double sum_z = 0.0;
  double sum_z_se = 0.0;
  double total = 0.0;  // max_y + sum_z, exactly
  double total_se = 0.0;
  std::vector<double> pointwise_z;     // E|Z_{t_i} - Zbar_i|^2 per i
  std::vector<double> pointwise_z_se;
  std::vector<double> weighted_z;      // (T - t_i)^{1+beta-theta_L} * pointwise
  int sample_size = 0;
  std::string reference_disclaimer;
};

// Pathwise error measurement: max_i E|Y_{t_i} - Ybar_i|^2 plus the
// sub-stepped midpoint approximation of sum_i int E|Z_t - Zbar_i|^2 dt.
// Paths are streamed in chunks; `theta_L` only affects the weighted profile.
ErrorReport scheme_error(const DiscreteSolution& solution, const ReferenceSolution& reference,
                         const SdeModel& model, const Driver& driver,
                         const TerminalCondition& terminal, int M, std::uint64_t seed,
                         int substeps, double theta_L);

struct L2Regularity {
  double projected = 0.0;  // sum_i int E|Z_t - Ztilde_{t_i}|^2 dt
  double projected_se = 0.0;
  double simple = 0.0;     // sum_i int E|Z_t - Z_{t_i}|^2 dt (upper bound)
  double simple_se = 0.0;
};

L2Regularity l2_regularity(const ReferenceSolution& reference, const SdeModel& model,
                           const TimeGrid& grid, int M, std::uint64_t seed, int substeps = 4,
                           int n_q = 32);

struct RateFit {
  std::vector<std::pair<double, double>> points;  // (N, error) actually used
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  bool dropped_smallest = false;
};

// OLS of log(error) on log(N).
RateFit fit_rate(const std::vector<std::pair<double, double>>& points,
                 bool drop_smallest = false);

struct AprioriProfile {
  double max_weighted = 0.0;
  std::vector<double> t;
  std::vector<double> weighted;  // (E|Z_{t_i}|^2)^{1/2} (T-t_i)^{-((2 theta_c ^ theta_phi)-1)/2}
};

// Weighted second-moment profile of Z against the a priori blow-up exponent.
// z_sq[i] must hold E|Z_{t_i}|^2 at the supplied times.
AprioriProfile apriori_z_check(const std::vector<double>& t, const std::vector<double>& z_sq,
                               double horizon, double theta_c, double theta_phi_or_alpha);

// E[g(X_t)] under the exact Gaussian state law of a constant-coefficient
// model, by piecewise Gauss-Legendre. Near the horizon the solution varies
// around the terminal breakpoints on the scale sigma sqrt(horizon - t); the
// segments refine there, so spiky integrands stay resolved.
double gaussian_state_expectation(const SdeModel& model, double t, double horizon,
                                  const std::vector<double>& breakpoints,
                                  const std::function<double(double)>& g);

// E|Z_t|^2 of a reference along the state law (deterministic).
std::vector<double> reference_z_second_moments(const ReferenceSolution& reference,
                                               const SdeModel& model, double horizon,
                                               const std::vector<double>& breakpoints,
                                               const std::vector<double>& times);

// JSON field names are frozen; the harness adds config_hash/seed/version on top.
nlohmann::json error_report_to_json(const ErrorReport& report);
nlohmann::json rate_fit_to_json(const RateFit& fit);
void write_error_report_json(const ErrorReport& report, std::ostream& os);
void write_error_report_csv_row(const ErrorReport& report, std::ostream& os, bool header);
void write_rate_fit_json(const RateFit& fit, std::ostream& os);

}  // namespace bsde
