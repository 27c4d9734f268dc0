#pragma once

#include <cstdint>

// Deterministic seed derivation and a draw-counting random source.
// Every randomized component of the library obtains its seeds through
// derive_seed(), so a (config, master seed) pair pins the whole computation
// across processes and runs.

namespace ldpjs {

// splitmix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Folds any number of tags into a base seed. Order-sensitive.
template <class... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t base, Tags... tags) noexcept {
  std::uint64_t s = mix64(base);
  ((s = mix64(s ^ mix64(static_cast<std::uint64_t>(tags)))), ...);
  return s;
}

// Tags used across the library when deriving sub-seeds. Values are arbitrary
// but frozen: changing them changes every derived stream.
enum SeedTag : std::uint64_t {
  kTagHashRowH = 0x68617368'68ull,   // per-row bucket hash seed
  kTagHashRowXi = 0x68617368'78ull,  // per-row sign hash seed
  kTagClient = 0x636c69ull,          // per-client perturbation stream
  kTagPermute = 0x7065726dull,       // user-group permutation
  kTagDataMap = 0x6d6170ull,         // rank-to-id mapping of generators
  kTagDataDraw = 0x64726177ull,      // sample stream of generators
  kTagRep = 0x726570ull,             // per-repetition seed of the harness
};

// Minimal counting PRNG (splitmix64 stream). One engine step per draw, so
// "consumes exactly N draws" contracts are directly observable through
// draw_count().
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    ++draws_;
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound) by multiply-shift; exact for power-of-two bounds,
  // bias < bound/2^64 otherwise. One draw.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  // Uniform double in [0, 1) with 53 random bits. One draw.
  double uniform01() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Returns -1 with probability minus_prob, +1 otherwise. One draw.
  // minus_prob must lie in [0, 1]; 0.5 maps to an exact 2^63 threshold.
  int flip_sign(double minus_prob) noexcept {
    const auto threshold = static_cast<std::uint64_t>(
        static_cast<long double>(minus_prob) * 18446744073709551616.0L);
    return next() < threshold ? -1 : +1;
  }

  std::uint64_t draw_count() const noexcept { return draws_; }

 private:
  std::uint64_t state_;
  std::uint64_t draws_ = 0;
};

}  // namespace ldpjs
