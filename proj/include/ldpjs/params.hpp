#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ldpjs {

// Shared sketch/privacy configuration: k rows, m columns (power of two so
// the Hadamard transform of order m exists), privacy budget epsilon, and the
// master seed every hash family is derived from.
struct SketchParams {
  std::uint32_t k = 18;
  std::uint32_t m = 1024;
  double epsilon = 4.0;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (k == 0) throw std::invalid_argument("sketch rows k must be >= 1");
    if (m < 2 || !std::has_single_bit(m))
      throw std::invalid_argument("sketch columns m must be a power of two >= 2");
    if (!(epsilon > 0.0))
      throw std::invalid_argument("privacy budget epsilon must be > 0");
  }

  // Probability of flipping a report's sign: 1/(e^eps + 1). Tends to 0 as
  // epsilon grows, 1/2 as epsilon -> 0.
  double flip_probability() const { return 1.0 / (std::exp(epsilon) + 1.0); }

  // Randomized-response debias constant c_eps = (e^eps+1)/(e^eps-1),
  // evaluated as 1 + 2/expm1(eps) so large budgets degrade to 1 instead of
  // overflowing.
  double debias_constant() const { return 1.0 + 2.0 / std::expm1(epsilon); }

  friend bool operator==(const SketchParams& a, const SketchParams& b) {
    return a.k == b.k && a.m == b.m && a.epsilon == b.epsilon &&
           a.master_seed == b.master_seed;
  }
};

}  // namespace ldpjs
