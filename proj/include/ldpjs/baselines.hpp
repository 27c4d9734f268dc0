#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>

#include "ldpjs/rng.hpp"

// k-ary randomized response over the full value domain: the frequency-oracle
// baseline the sketch pipelines are compared against.

namespace ldpjs {

struct KrrParams {
  double epsilon = 1.0;
  std::uint64_t domain_size = 2;
  double p = 0.0;  // keep probability e^eps / (e^eps + |D| - 1)
  double q = 0.0;  // switch probability 1 / (e^eps + |D| - 1)

  static KrrParams create(double epsilon, std::uint64_t domain_size) {
    if (domain_size < 2)
      throw std::invalid_argument("k-RR needs a domain of at least 2 values");
    if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
    KrrParams kp;
    kp.epsilon = epsilon;
    kp.domain_size = domain_size;
    const double a = std::exp(epsilon);
    const double denom = a + static_cast<double>(domain_size) - 1.0;
    kp.p = a / denom;
    kp.q = 1.0 / denom;
    return kp;
  }
};

// Keeps d with probability p, otherwise reports a uniform draw among the
// other |D|-1 values.
inline std::uint64_t krr_perturb(std::uint64_t d, const KrrParams& params,
                                 RandomSource& rng) {
  if (d >= params.domain_size)
    throw std::out_of_range("value outside the k-RR domain");
  if (rng.uniform01() < params.p) return d;
  const std::uint64_t other = rng.uniform_index(params.domain_size - 1);
  return other < d ? other : other + 1;
}

// Join estimate from calibrated frequency vectors:
//   f~(d) = (count(d) - n*q) / (p - q),  Est = sum_d f~_A(d) * f~_B(d).
// The domain sum expands algebraically so only observed values are touched:
//   Est = beta^2 * sum_d cA(d)*cB(d) - beta*(alphaB*nA + alphaA*nB)
//         + |D| * alphaA * alphaB,   with beta = 1/(p-q), alphaX = nX*q*beta.
inline double krr_join_estimate(std::span<const std::uint64_t> reports_a,
                                std::span<const std::uint64_t> reports_b,
                                const KrrParams& params) {
  if (params.p == params.q)
    throw std::invalid_argument("k-RR calibration undefined: p equals q");
  std::unordered_map<std::uint64_t, std::uint64_t> count_a;
  count_a.reserve(reports_a.size());
  for (std::uint64_t d : reports_a) ++count_a[d];
  double cross = 0.0;
  {
    std::unordered_map<std::uint64_t, std::uint64_t> count_b;
    count_b.reserve(reports_b.size());
    for (std::uint64_t d : reports_b) ++count_b[d];
    for (const auto& [d, cb] : count_b) {
      const auto it = count_a.find(d);
      if (it != count_a.end())
        cross += static_cast<double>(it->second) * static_cast<double>(cb);
    }
  }
  const double beta = 1.0 / (params.p - params.q);
  const double na = static_cast<double>(reports_a.size());
  const double nb = static_cast<double>(reports_b.size());
  const double alpha_a = na * params.q * beta;
  const double alpha_b = nb * params.q * beta;
  return beta * beta * cross - beta * (alpha_b * na + alpha_a * nb) +
         static_cast<double>(params.domain_size) * alpha_a * alpha_b;
}

// Calibrated frequency estimate of one value from a report histogram.
inline double krr_calibrate(std::uint64_t count_d, std::uint64_t n,
                            const KrrParams& params) {
  if (params.p == params.q)
    throw std::invalid_argument("k-RR calibration undefined: p equals q");
  return (static_cast<double>(count_d) -
          static_cast<double>(n) * params.q) /
         (params.p - params.q);
}

}  // namespace ldpjs
