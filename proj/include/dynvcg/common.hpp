#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace dynvcg {

/// Random engine used by every stochastic component. Each simulation loop,
/// learner and bidder owns its own instance.
using Rng = std::mt19937_64;

/// Derives an independent stream from a base seed and a stream label so that
/// environment, seller and bidders never share draws.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Numerical tolerances shared across modules.
struct Tolerances {
  static constexpr double kKernelRowSum = 1e-12;
  static constexpr double kPolicyRowSum = 1e-12;
  static constexpr double kOccupancy = 1e-9;
  static constexpr double kZeroDenominator = 1e-12;
  static constexpr double kLpFeasibility = 1e-8;
  static constexpr double kMechanism = 1e-9;
};

/// Malformed input or a configuration that cannot be run. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Neumaier-compensated running sum. Long regret accumulations need it for the
/// additivity identity to hold at 1e-9.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace dynvcg
