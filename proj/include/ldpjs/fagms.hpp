#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ldpjs/hashing.hpp"
#include "ldpjs/stats.hpp"

// Non-private fast-AGMS sketch: the accuracy baseline and the structural
// reference the LDP variants are measured against. Counters are exact 64-bit
// integers; every value updates one counter per row at h_j(d) by xi_j(d).

namespace ldpjs {

class FagmsSketch {
 public:
  explicit FagmsSketch(HashFamily family)
      : family_(std::move(family)),
        counters_(static_cast<std::size_t>(family_.k()) * family_.m(), 0) {}

  void insert(std::uint64_t d) {
    const std::uint32_t m = family_.m();
    for (std::uint32_t j = 0; j < family_.k(); ++j) {
      const HashPair& hp = family_.row(j);
      counters_[static_cast<std::size_t>(j) * m + hp.bucket(d)] += hp.sign(d);
    }
  }

  std::int64_t cell(std::uint32_t j, std::uint32_t x) const {
    return counters_.at(static_cast<std::size_t>(j) * family_.m() + x);
  }

  const HashFamily& family() const noexcept { return family_; }
  const std::vector<std::int64_t>& counters() const noexcept { return counters_; }

  // Cell-wise sum; requires identical families.
  void merge_from(const FagmsSketch& other) {
    if (!(family_ == other.family_))
      throw std::invalid_argument("fagms merge: hash families differ");
    for (std::size_t i = 0; i < counters_.size(); ++i)
      counters_[i] += other.counters_[i];
  }

 private:
  HashFamily family_;
  std::vector<std::int64_t> counters_;
};

// Join size estimate: median over rows of the row inner products.
inline double fagms_join(const FagmsSketch& a, const FagmsSketch& b) {
  if (!(a.family() == b.family()))
    throw std::invalid_argument("fagms join: hash families differ");
  const std::uint32_t k = a.family().k();
  const std::uint32_t m = a.family().m();
  std::vector<double> rows(k);
  for (std::uint32_t j = 0; j < k; ++j) {
    std::int64_t dot = 0;
    const std::size_t base = static_cast<std::size_t>(j) * m;
    for (std::uint32_t x = 0; x < m; ++x)
      dot += a.counters()[base + x] * b.counters()[base + x];
    rows[j] = static_cast<double>(dot);
  }
  return median_inplace(rows);
}

// Exact join size sum_d f_A(d)*f_B(d) by hash-map counting. The ground truth
// for every estimator in the project.
inline std::uint64_t true_join_size(std::span<const std::uint64_t> a,
                                    std::span<const std::uint64_t> b) {
  if (a.empty() || b.empty()) return 0;
  std::unordered_map<std::uint64_t, std::uint64_t> freq_a;
  freq_a.reserve(a.size());
  for (std::uint64_t d : a) ++freq_a[d];
  std::uint64_t join = 0;
  for (std::uint64_t d : b) {
    auto it = freq_a.find(d);
    if (it != freq_a.end()) join += it->second;
  }
  return join;
}

}  // namespace ldpjs
