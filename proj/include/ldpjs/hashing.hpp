#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ldpjs/params.hpp"
#include "ldpjs/rng.hpp"

// Hash machinery shared by every sketch in the project:
//   - per-row bucket hash h_j  : pairwise independent, degree-1 polynomial
//     over the Mersenne prime field p = 2^61 - 1, reduced mod m;
//   - per-row sign hash xi_j   : 4-wise independent, degree-3 polynomial over
//     the same field, low bit mapped {0,1} -> {+1,-1};
//   - implicit Hadamard matrix entries H_m[a,b] = (-1)^popcount(a AND b).
// All of it is pure and fully determined by (master seed, row index), so two
// parties deriving from the same master seed reconstruct identical functions.

namespace ldpjs {

inline constexpr std::uint64_t kMersenne61 = (1ull << 61) - 1;

namespace detail {

inline std::uint64_t mulmod61(std::uint64_t a, std::uint64_t b) noexcept {
  const unsigned __int128 t = static_cast<unsigned __int128>(a) * b;
  std::uint64_t r = static_cast<std::uint64_t>(t & kMersenne61) +
                    static_cast<std::uint64_t>(t >> 61);
  if (r >= kMersenne61) r -= kMersenne61;
  return r;
}

inline std::uint64_t addmod61(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t r = a + b;  // both < 2^61, no overflow
  if (r >= kMersenne61) r -= kMersenne61;
  return r;
}

}  // namespace detail

// One sketch row's hash pair (h_j, xi_j). Polynomial coefficients are drawn
// from the two seeds at construction; evaluation never touches global state.
struct HashPair {
  std::uint32_t row_index = 0;
  std::uint64_t seed_h = 0;
  std::uint64_t seed_xi = 0;
  std::uint32_t m = 2;
  bool xi_disabled = false;  // Count-Mean-Sketch mode: xi == +1 everywhere

  std::uint64_t coef_a = 1, coef_b = 0;  // h(x) = (a*x + b) mod p mod m
  std::uint64_t coef_xi[4] = {0, 0, 0, 0};

  static HashPair derive(std::uint32_t row, std::uint64_t seed_h,
                         std::uint64_t seed_xi, std::uint32_t m,
                         bool xi_disabled = false) {
    if (m < 2 || !std::has_single_bit(m))
      throw std::invalid_argument("hash bucket count m must be a power of two >= 2");
    HashPair hp;
    hp.row_index = row;
    hp.seed_h = seed_h;
    hp.seed_xi = seed_xi;
    hp.m = m;
    hp.xi_disabled = xi_disabled;
    RandomSource rh(seed_h);
    hp.coef_a = 1 + rh.uniform_index(kMersenne61 - 1);  // in [1, p)
    hp.coef_b = rh.uniform_index(kMersenne61);
    RandomSource rx(seed_xi);
    for (auto& c : hp.coef_xi) c = rx.uniform_index(kMersenne61);
    return hp;
  }

  // Bucket index h_j(d) in [0, m).
  std::uint32_t bucket(std::uint64_t d) const noexcept {
    const std::uint64_t x = d % kMersenne61;
    const std::uint64_t v = detail::addmod61(detail::mulmod61(coef_a, x), coef_b);
    return static_cast<std::uint32_t>(v & (m - 1));
  }

  // Sign xi_j(d) in {-1, +1}.
  int sign(std::uint64_t d) const noexcept {
    if (xi_disabled) return +1;
    const std::uint64_t x = d % kMersenne61;
    std::uint64_t v = coef_xi[3];
    v = detail::addmod61(detail::mulmod61(v, x), coef_xi[2]);
    v = detail::addmod61(detail::mulmod61(v, x), coef_xi[1]);
    v = detail::addmod61(detail::mulmod61(v, x), coef_xi[0]);
    return (v & 1) ? -1 : +1;
  }

  friend bool operator==(const HashPair& a, const HashPair& b) {
    return a.row_index == b.row_index && a.seed_h == b.seed_h &&
           a.seed_xi == b.seed_xi && a.m == b.m && a.xi_disabled == b.xi_disabled;
  }
};

// The k hash pairs of a sketch, derived from a master seed. Attributes that
// must be joinable derive their families from the same master seed.
class HashFamily {
 public:
  HashFamily() = default;

  HashFamily(SketchParams params, std::vector<HashPair> rows, bool xi_disabled)
      : params_(params), rows_(std::move(rows)), xi_disabled_(xi_disabled) {}

  std::uint32_t k() const noexcept { return params_.k; }
  std::uint32_t m() const noexcept { return params_.m; }
  const SketchParams& params() const noexcept { return params_; }
  bool xi_disabled() const noexcept { return xi_disabled_; }

  const HashPair& row(std::size_t j) const { return rows_.at(j); }

  friend bool operator==(const HashFamily& a, const HashFamily& b) {
    return a.params_ == b.params_ && a.xi_disabled_ == b.xi_disabled_ &&
           a.rows_ == b.rows_;
  }

 private:
  SketchParams params_;
  std::vector<HashPair> rows_;
  bool xi_disabled_ = false;
};

// Derives the k-row hash family of a parameter set. Row j's seeds are
// derive_seed(master_seed, j, role tag), so any process holding the master
// seed rebuilds the identical family.
inline HashFamily derive_family(const SketchParams& params,
                                bool xi_disabled = false) {
  params.validate();
  std::vector<HashPair> rows;
  rows.reserve(params.k);
  for (std::uint32_t j = 0; j < params.k; ++j) {
    const std::uint64_t sh = derive_seed(params.master_seed, j, kTagHashRowH);
    const std::uint64_t sx = derive_seed(params.master_seed, j, kTagHashRowXi);
    rows.push_back(HashPair::derive(j, sh, sx, params.m, xi_disabled));
  }
  return HashFamily(params, std::move(rows), xi_disabled);
}

// Entry H_m[a, b] of the order-m Hadamard matrix, m a power of two, without
// materializing the matrix. H_m[a,b] = (-1)^popcount(a AND b).
inline int hadamard_entry(std::uint32_t a, std::uint32_t b, std::uint32_t m) {
  if (m < 2 || !std::has_single_bit(m))
    throw std::invalid_argument("Hadamard order m must be a power of two >= 2");
  if (a >= m || b >= m)
    throw std::out_of_range("Hadamard index out of range");
  return (std::popcount(a & b) & 1) ? -1 : +1;
}

// Unchecked variant for inner loops that have already validated shapes.
inline int hadamard_entry_unchecked(std::uint32_t a, std::uint32_t b) noexcept {
  return (std::popcount(a & b) & 1) ? -1 : +1;
}

}  // namespace ldpjs
