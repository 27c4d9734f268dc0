#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ldpjs/rng.hpp"

// Synthetic workload generators and file ingestion. Generators are exact
// inverse-CDF samplers over precomputed mass functions, fully determined by
// their seed (including the rank-to-id mapping, a seeded permutation of the
// domain, so rank order never aligns systematically with id order).

namespace ldpjs {

namespace detail {

inline std::vector<std::uint64_t> seeded_id_permutation(std::uint64_t domain,
                                                        std::uint64_t seed) {
  std::vector<std::uint64_t> ids(domain);
  for (std::uint64_t i = 0; i < domain; ++i) ids[i] = i;
  RandomSource rng(seed);
  for (std::uint64_t i = domain; i > 1; --i) {
    const std::uint64_t r = rng.uniform_index(i);
    std::swap(ids[i - 1], ids[r]);
  }
  return ids;
}

}  // namespace detail

// n i.i.d. Zipf(alpha) draws over ranks 1..domain, mapped to ids through a
// seed-fixed permutation.
inline std::vector<std::uint64_t> gen_zipf(std::size_t n, std::uint64_t domain,
                                           double alpha, std::uint64_t seed) {
  if (domain < 1) throw std::invalid_argument("zipf domain must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("zipf alpha must be > 0");
  std::vector<double> cdf(domain);
  double total = 0.0;
  for (std::uint64_t x = 1; x <= domain; ++x) {
    total += std::pow(static_cast<double>(x), -alpha);
    cdf[x - 1] = total;
  }
  for (double& c : cdf) c /= total;
  cdf.back() = 1.0;

  const auto ids =
      detail::seeded_id_permutation(domain, derive_seed(seed, kTagDataMap));
  RandomSource rng(derive_seed(seed, kTagDataDraw));
  std::vector<std::uint64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto rank = static_cast<std::uint64_t>(
        std::min<std::ptrdiff_t>(it - cdf.begin(),
                                 static_cast<std::ptrdiff_t>(domain) - 1));
    out[i] = ids[rank];
  }
  return out;
}

// n draws of round(N(mu, sigma)) clamped to [0, domain). Box-Muller on the
// library's own uniform stream keeps the sequence seed-determined.
inline std::vector<std::uint64_t> gen_gaussian(std::size_t n, std::uint64_t domain,
                                               double mu, double sigma,
                                               std::uint64_t seed) {
  if (domain < 1) throw std::invalid_argument("gaussian domain must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be > 0");
  RandomSource rng(derive_seed(seed, kTagDataDraw));
  std::vector<std::uint64_t> out(n);
  const double hi = static_cast<double>(domain - 1);
  for (std::size_t i = 0; i < n; i += 2) {
    const double u1 =
        (static_cast<double>(rng.next() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = rng.uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    const double z[2] = {radius * std::cos(angle), radius * std::sin(angle)};
    for (int t = 0; t < 2 && i + t < n; ++t) {
      const double v = std::round(mu + sigma * z[t]);
      out[i + t] = static_cast<std::uint64_t>(std::clamp(v, 0.0, hi));
    }
  }
  return out;
}

// Newline-delimited unsigned integers. Blank lines are skipped; anything
// else that fails to parse is reported with its line number.
inline std::vector<std::uint64_t> load_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<std::uint64_t> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(line, &pos);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": not an unsigned integer: '" + line + "'");
    }
    if (pos != line.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": trailing characters: '" + line + "'");
    out.push_back(v);
  }
  return out;
}

// Two-column CSV of tuples "a,b" for middle tables.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> load_pairs(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'a,b'");
    const std::string left = line.substr(0, comma);
    const std::string right = line.substr(comma + 1);
    try {
      std::size_t pl = 0, pr = 0;
      const std::uint64_t a = std::stoull(left, &pl);
      const std::uint64_t b = std::stoull(right, &pr);
      if (pl != left.size() || pr != right.size())
        throw std::invalid_argument("trailing characters");
      out.emplace_back(a, b);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": not an unsigned integer pair: '" + line + "'");
    }
  }
  return out;
}

}  // namespace ldpjs
