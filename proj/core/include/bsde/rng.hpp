#pragma once

#include <array>
#include <cstdint>

#include "bsde/util.hpp"

namespace bsde {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// Stateless: every draw is a pure function of (key, counter), so any subset of
// paths can be regenerated independently of batch size.
struct Philox4x32 {
  static constexpr std::uint32_t kW32A = 0x9E3779B9u;
  static constexpr std::uint32_t kW32B = 0xBB67AE85u;
  static constexpr std::uint32_t kM4x32A = 0xD2511F53u;
  static constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

  static std::array<std::uint32_t, 4> block(std::uint64_t key,
                                            const std::array<std::uint32_t, 4>& counter) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    std::uint32_t c0 = counter[0], c1 = counter[1], c2 = counter[2], c3 = counter[3];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * c0;
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * c2;
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      c0 = n0;
      c1 = lo1;
      c2 = n2;
      c3 = lo0;
      k0 += kW32A;
      k1 += kW32B;
    }
    return {c0, c1, c2, c3};
  }
};

// Stream tags keep distinct consumers of the same (path, step) disjoint.
enum class RngStream : std::uint32_t {
  increments = 0,  // Brownian increments of the forward simulation
  bridge = 1,      // within-interval bridge draws for sub-stepped integrals
  nested = 2,      // inner simulations (nested Monte Carlo)
};

// Draws are keyed by (seed) and countered by (path, step, component, stream/sub).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  double uniform(std::uint64_t path, std::uint32_t step, std::uint32_t component,
                 RngStream stream = RngStream::increments, std::uint32_t sub = 0) const {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), step,
        component | (sub << 8) | (static_cast<std::uint32_t>(stream) << 28)};
    const auto words = Philox4x32::block(seed_, ctr);
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(words[0]) << 32) | static_cast<std::uint64_t>(words[1]);
    // 53-bit mantissa, offset so the result is strictly inside (0, 1).
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double normal(std::uint64_t path, std::uint32_t step, std::uint32_t component,
                RngStream stream = RngStream::increments, std::uint32_t sub = 0) const {
    return inverse_normal_cdf(uniform(path, step, component, stream, sub));
  }

 private:
  std::uint64_t seed_;
};

}  // namespace bsde
