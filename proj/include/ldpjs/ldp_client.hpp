#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "ldpjs/frequent_items.hpp"
#include "ldpjs/hashing.hpp"
#include "ldpjs/params.hpp"
#include "ldpjs/report.hpp"
#include "ldpjs/rng.hpp"

// Everything that runs on a user's device. A client encodes its value into
// an implicit one-hot row (xi_j(d) at position h_j(d)), samples one entry of
// its Hadamard transform, and flips the sampled sign with probability
// 1/(e^eps + 1). The Hadamard entry is computed lazily, so a report costs
// O(1) instead of O(m).

namespace ldpjs {

// Which frequency class the surrounding sketch is targeting.
// High: high-frequency values (members of FI) are targets.
// Low:  low-frequency values (non-members of FI) are targets.
enum class FapMode : std::uint8_t { High, Low };

inline char fap_mode_tag(FapMode m) { return m == FapMode::High ? 'H' : 'L'; }

// One-attribute report. Consumes exactly three draws: j, l, b.
inline PerturbedReport client_perturb(std::uint64_t d, const SketchParams& params,
                                      const HashFamily& family, RandomSource& rng) {
  const std::uint32_t j =
      static_cast<std::uint32_t>(rng.uniform_index(params.k));
  const std::uint32_t l =
      static_cast<std::uint32_t>(rng.uniform_index(params.m));
  const HashPair& hp = family.row(j);
  const int w = hadamard_entry_unchecked(hp.bucket(d), l) * hp.sign(d);
  const int b = rng.flip_sign(params.flip_probability());
  return PerturbedReport{static_cast<std::int8_t>(b * w),
                         static_cast<std::uint16_t>(j), l};
}

// Frequency-aware perturbation. Target values are reported exactly as
// client_perturb does; non-target values are encoded at a uniformly random
// position r independent of d, so their aggregate lands flat across the
// sketch and the server can subtract it. d is a non-target value when
// (mode == High) coincides with (d not in FI).
// Non-target path consumes four draws (j, l, r, b); target path three.
inline PerturbedReport fap_perturb(std::uint64_t d, FapMode mode,
                                   const FrequentItemSet& fi,
                                   const SketchParams& params,
                                   const HashFamily& family, RandomSource& rng) {
  const bool frequent = fi.contains(d);
  const bool non_target = (mode == FapMode::High) == !frequent;
  if (!non_target) return client_perturb(d, params, family, rng);
  const std::uint32_t j =
      static_cast<std::uint32_t>(rng.uniform_index(params.k));
  const std::uint32_t l =
      static_cast<std::uint32_t>(rng.uniform_index(params.m));
  const std::uint32_t r =
      static_cast<std::uint32_t>(rng.uniform_index(params.m));
  const int b = rng.flip_sign(params.flip_probability());
  const int w = hadamard_entry_unchecked(r, l);
  return PerturbedReport{static_cast<std::int8_t>(b * w),
                         static_cast<std::uint16_t>(j), l};
}

// ---------------------------------------------------------------------------
// Closed-form output laws, used by the privacy verifier and tests. Weights
// are unnormalized: for a given input, Pr[(y,j,l)] = weight / (k*m*(A+1))
// with A = e^eps. The normalizer is input-independent, so probability ratios
// between inputs equal weight ratios exactly.
// ---------------------------------------------------------------------------

// Law of client_perturb: weight A when y matches the unflipped sample,
// weight 1 otherwise.
inline double client_report_weight(std::uint64_t d, int y, std::uint32_t j,
                                   std::uint32_t l, const SketchParams& params,
                                   const HashFamily& family) {
  if (y != -1 && y != 1) throw std::invalid_argument("y must be -1 or +1");
  if (j >= params.k || l >= params.m)
    throw std::out_of_range("report indices out of range");
  const double a = std::exp(params.epsilon);
  const HashPair& hp = family.row(j);
  const int w = hadamard_entry_unchecked(hp.bucket(d), l) * hp.sign(d);
  return y == w ? a : 1.0;
}

// Law of the non-target branch of fap_perturb, averaged over the hidden
// uniform draw r and expressed on the same scale as client_report_weight.
// Independent of the input value by construction. Column l = 0 of H_m is all
// ones, so there the law degenerates to the target law's shape; elsewhere
// exactly half the r draws give each sign.
inline double fap_nontarget_weight(int y, std::uint32_t j, std::uint32_t l,
                                   const SketchParams& params) {
  if (y != -1 && y != 1) throw std::invalid_argument("y must be -1 or +1");
  if (j >= params.k || l >= params.m)
    throw std::out_of_range("report indices out of range");
  const double a = std::exp(params.epsilon);
  const double m = static_cast<double>(params.m);
  double match = 0.0;  // # r with H_m[r,l] == y
  if (l == 0) {
    match = (y == 1) ? m : 0.0;
  } else {
    match = m / 2.0;
  }
  return (match * a + (m - match)) / m;
}

// Law of fap_perturb for a concrete input under a mode and item set.
inline double fap_report_weight(std::uint64_t d, FapMode mode,
                                const FrequentItemSet& fi, int y,
                                std::uint32_t j, std::uint32_t l,
                                const SketchParams& params,
                                const HashFamily& family) {
  const bool non_target = (mode == FapMode::High) == !fi.contains(d);
  return non_target ? fap_nontarget_weight(y, j, l, params)
                    : client_report_weight(d, y, j, l, params, family);
}

}  // namespace ldpjs
