#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace bsde {

inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// Inverse of the standard normal CDF (Wichura's PPND16, full double accuracy).
double inverse_normal_cdf(double p);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Sample mean and standard error of the mean.
MeanSe mean_and_se(const std::vector<double>& xs);

// Global worker count used by parallel_for; 0 means hardware_concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs fn(begin, end) over a static partition of [0, n). Callers write results
// into disjoint preallocated slots, so output is identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// Full-precision decimal formatting (17 significant digits) for stable fixtures.
std::string format_full(double x);

// FNV-1a, used to stamp output files with a config hash.
std::uint64_t fnv1a64(const std::string& data);

}  // namespace bsde
