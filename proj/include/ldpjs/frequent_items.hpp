#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

// Phase-1 output of the two-phase estimator: the union of per-attribute
// frequent-item sets, with the population-scaled frequency estimates that
// later feed the non-target subtraction. Items are kept sorted so clients
// can test membership by binary search.

namespace ldpjs {

struct FrequentItemSet {
  std::vector<std::uint64_t> items;     // sorted union FI_A ∪ FI_B
  std::vector<double> freq_a;           // per-item population-scaled estimate, attribute A
  std::vector<double> freq_b;           // same for attribute B (raw, may be negative)
  double theta = 0.0;                   // threshold fraction used
  std::pair<std::uint64_t, std::uint64_t> sample_sizes{0, 0};      // (|S_A|, |S_B|)
  std::pair<std::uint64_t, std::uint64_t> population_sizes{0, 0};  // (|A|, |B|)

  bool contains(std::uint64_t d) const {
    return std::binary_search(items.begin(), items.end(), d);
  }

  std::size_t size() const { return items.size(); }

  double high_freq_total_a() const {
    double s = 0.0;
    for (double f : freq_a) s += f;
    return s;
  }

  double high_freq_total_b() const {
    double s = 0.0;
    for (double f : freq_b) s += f;
    return s;
  }
};

}  // namespace ldpjs
