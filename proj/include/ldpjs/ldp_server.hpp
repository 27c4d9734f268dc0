#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ldpjs/frequent_items.hpp"
#include "ldpjs/hashing.hpp"
#include "ldpjs/ldp_client.hpp"
#include "ldpjs/params.hpp"
#include "ldpjs/report.hpp"
#include "ldpjs/rng.hpp"
#include "ldpjs/stats.hpp"

// The untrusted aggregator. Reports accumulate into a k x m counter matrix
// scaled by k*c_eps; a single inverse Hadamard pass ("restore") then turns
// the sampled-and-flipped reports back into a fast-AGMS-shaped sketch that
// supports frequency estimates and median-of-rows join products.

namespace ldpjs {

namespace detail {

// In-place unnormalized Walsh-Hadamard transform, i.e. v <- v * H_m.
inline void fwht(double* v, std::uint32_t m) {
  for (std::uint32_t len = 1; len < m; len <<= 1) {
    for (std::uint32_t i = 0; i < m; i += len << 1) {
      for (std::uint32_t t = i; t < i + len; ++t) {
        const double a = v[t];
        const double b = v[t + len];
        v[t] = a + b;
        v[t + len] = a - b;
      }
    }
  }
}

}  // namespace detail

class PrivateSketch {
 public:
  PrivateSketch(SketchParams params, HashFamily family)
      : params_(params),
        family_(std::move(family)),
        counters_(static_cast<std::size_t>(params.k) * params.m, 0.0),
        scale_(static_cast<double>(params.k) * params.debias_constant()) {
    params_.validate();
    if (!(family_.params() == params_))
      throw std::invalid_argument("sketch params and hash family disagree");
  }

  // Accumulates one report pre-restore. Counters hold the raw signed report
  // sums (exact small integers) until restore applies the k * c_eps debias
  // scale together with the Hadamard pass; this keeps merges of partial
  // sketches cell-exact regardless of accumulation order.
  void add(const PerturbedReport& r) {
    if (restored_) throw std::logic_error("cannot add to a restored sketch");
    if (r.j >= params_.k || r.l >= params_.m)
      throw std::out_of_range("report indices out of range");
    if (r.y != -1 && r.y != 1)
      throw std::invalid_argument("report sign must be -1 or +1");
    counters_[static_cast<std::size_t>(r.j) * params_.m + r.l] +=
        static_cast<double>(r.y);
    ++n_reports_;
  }

  // Applies the debias scale and M <- M * H_m^T (H_m is symmetric) row by
  // row. Exactly once.
  void restore() {
    if (restored_) throw std::logic_error("sketch already restored");
    for (double& c : counters_) c *= scale_;
    for (std::uint32_t j = 0; j < params_.k; ++j)
      detail::fwht(counters_.data() + static_cast<std::size_t>(j) * params_.m,
                   params_.m);
    restored_ = true;
  }

  bool restored() const noexcept { return restored_; }
  std::uint64_t report_count() const noexcept { return n_reports_; }
  const SketchParams& params() const noexcept { return params_; }
  const HashFamily& family() const noexcept { return family_; }
  std::optional<FapMode> built_mode() const noexcept { return built_mode_; }
  void set_built_mode(FapMode m) noexcept { built_mode_ = m; }

  double cell(std::uint32_t j, std::uint32_t x) const {
    return counters_.at(static_cast<std::size_t>(j) * params_.m + x);
  }

  std::span<const double> row(std::uint32_t j) const {
    return {counters_.data() + static_cast<std::size_t>(j) * params_.m,
            params_.m};
  }

  const std::vector<double>& counters() const noexcept { return counters_; }

  // Pre-restore cell-wise merge; report counts add.
  void merge_from(const PrivateSketch& other) {
    if (restored_ || other.restored_)
      throw std::logic_error("merge requires both sketches pre-restore");
    if (!(params_ == other.params_) || !(family_ == other.family_))
      throw std::invalid_argument("merge: sketch params or families differ");
    for (std::size_t i = 0; i < counters_.size(); ++i)
      counters_[i] += other.counters_[i];
    n_reports_ += other.n_reports_;
  }

  // Unbiased frequency estimate: mean over rows of M[j, h_j(d)] * xi_j(d).
  double estimate_frequency(std::uint64_t d) const {
    if (!restored_) throw std::logic_error("estimate on unrestored sketch");
    double sum = 0.0;
    for (std::uint32_t j = 0; j < params_.k; ++j) {
      const HashPair& hp = family_.row(j);
      sum += cell(j, hp.bucket(d)) * static_cast<double>(hp.sign(d));
    }
    return sum / static_cast<double>(params_.k);
  }

  // --- Snapshot format -----------------------------------------------------
  // Little-endian header: k u32, m u32, epsilon f64, master_seed u64,
  // debiased u8, n_reports u64; then k*m row-major f64 counters.
  void save(std::ostream& os) const {
    auto put = [&os](const void* p, std::size_t n) {
      os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    };
    put(&params_.k, 4);
    put(&params_.m, 4);
    put(&params_.epsilon, 8);
    put(&params_.master_seed, 8);
    const std::uint8_t flag = restored_ ? 1 : 0;
    put(&flag, 1);
    put(&n_reports_, 8);
    put(counters_.data(), counters_.size() * sizeof(double));
    if (!os) throw std::runtime_error("sketch snapshot write failed");
  }

  static PrivateSketch load(std::istream& is) {
    auto get = [&is](void* p, std::size_t n) {
      is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
      if (!is) throw std::runtime_error("sketch snapshot truncated");
    };
    SketchParams params;
    get(&params.k, 4);
    get(&params.m, 4);
    get(&params.epsilon, 8);
    get(&params.master_seed, 8);
    std::uint8_t flag = 0;
    get(&flag, 1);
    std::uint64_t n_reports = 0;
    get(&n_reports, 8);
    PrivateSketch sk(params, derive_family(params));
    get(sk.counters_.data(), sk.counters_.size() * sizeof(double));
    sk.restored_ = flag != 0;
    sk.n_reports_ = n_reports;
    return sk;
  }

 private:
  SketchParams params_;
  HashFamily family_;
  std::vector<double> counters_;
  double scale_;
  std::uint64_t n_reports_ = 0;
  bool restored_ = false;
  std::optional<FapMode> built_mode_;
};

// Builds and restores a sketch from a report stream (PriSK).
inline PrivateSketch prisk_build(std::span<const PerturbedReport> reports,
                                 const SketchParams& params,
                                 const HashFamily& family) {
  PrivateSketch sk(params, family);
  for (const auto& r : reports) sk.add(r);
  sk.restore();
  return sk;
}

inline PrivateSketch merge(const PrivateSketch& a, const PrivateSketch& b) {
  PrivateSketch out = a;
  out.merge_from(b);
  return out;
}

// Median over rows of the row inner products of two restored sketches.
inline double sketch_join(const PrivateSketch& a, const PrivateSketch& b) {
  if (!(a.params() == b.params()) || !(a.family() == b.family()))
    throw std::invalid_argument("join: sketch params or families differ");
  if (!a.restored() || !b.restored())
    throw std::logic_error("join requires restored sketches");
  const std::uint32_t k = a.params().k;
  const std::uint32_t m = a.params().m;
  std::vector<double> rows(k);
  for (std::uint32_t j = 0; j < k; ++j) {
    const auto ra = a.row(j);
    const auto rb = b.row(j);
    double dot = 0.0;
    for (std::uint32_t x = 0; x < m; ++x) dot += ra[x] * rb[x];
    rows[j] = dot;
  }
  return median_inplace(rows);
}

// Scans the declared id domain and returns FI = FI_A ∪ FI_B, keeping the raw
// population-scaled estimates per attribute. Estimates are clamped at zero
// only for the threshold comparison; the stored values stay raw so later
// join arithmetic remains unbiased.
inline FrequentItemSet find_frequent_items(
    const PrivateSketch& sk_a, const PrivateSketch& sk_b, std::uint64_t domain,
    double theta, std::pair<std::uint64_t, std::uint64_t> sample_sizes,
    std::pair<std::uint64_t, std::uint64_t> population_sizes) {
  if (domain == 0) throw std::invalid_argument("candidate domain is empty");
  if (sample_sizes.first == 0 || sample_sizes.second == 0)
    throw std::invalid_argument("sample sizes must be positive");
  FrequentItemSet fi;
  fi.theta = theta;
  fi.sample_sizes = sample_sizes;
  fi.population_sizes = population_sizes;
  const double scale_a = static_cast<double>(population_sizes.first) /
                         static_cast<double>(sample_sizes.first);
  const double scale_b = static_cast<double>(population_sizes.second) /
                         static_cast<double>(sample_sizes.second);
  const double bar_a = theta * static_cast<double>(population_sizes.first);
  const double bar_b = theta * static_cast<double>(population_sizes.second);
  for (std::uint64_t d = 0; d < domain; ++d) {
    const double fa = sk_a.estimate_frequency(d) * scale_a;
    const double fb = sk_b.estimate_frequency(d) * scale_b;
    if (std::max(fa, 0.0) > bar_a || std::max(fb, 0.0) > bar_b) {
      fi.items.push_back(d);
      fi.freq_a.push_back(fa);
      fi.freq_b.push_back(fb);
    }
  }
  return fi;
}

// Where join_est takes the non-target mass it subtracts (|NT|/m per cell).
//
// SketchMass (default): |NT| is estimated from the sketch itself, as the
// mean over rows of the row sums. Non-target reports contribute their count
// to every row sum while target encodings contribute a zero-mean signed
// mass, so the estimator is unbiased no matter how noisy the phase-1 item
// selection was. The frequent-item route (both variants below) sums the
// phase-1 estimates of the selected items; selecting on the same noisy
// estimates that are then summed inflates the total once the phase-1 noise
// reaches the threshold, which desk-scale samples do.
//
// GroupScaled: |NT| = population non-target mass from the FI estimate sums,
// scaled into the group whose reports the sketch actually holds.
// PopulationScaled: the population-level mass verbatim.
enum class SubtractionPolicy : std::uint8_t {
  SketchMass,
  GroupScaled,
  PopulationScaled,
};

namespace detail {

inline double nt_from_sketch(const PrivateSketch& sk, FapMode mode,
                             const FrequentItemSet& fi, double group_size) {
  if (fi.items.empty()) {
    // No frequent values: under mode L nothing is a non-target; under mode H
    // everything is, and the count is exact.
    return mode == FapMode::Low ? 0.0 : group_size;
  }
  double total = 0.0;
  for (std::uint32_t j = 0; j < sk.params().k; ++j) {
    const auto row = sk.row(j);
    double s = 0.0;
    for (double v : row) s += v;
    total += s;
  }
  const double est = total / static_cast<double>(sk.params().k);
  return std::clamp(est, 0.0, group_size);
}

}  // namespace detail

// Join estimate from two frequency-aware sketches: removes the expected
// non-target contribution (|NT|/m per cell) from each side, then takes the
// median-of-rows product.
inline double join_est(const PrivateSketch& sk_a, const PrivateSketch& sk_b,
                       FapMode mode, const FrequentItemSet& fi,
                       std::pair<std::uint64_t, std::uint64_t> group_sizes,
                       SubtractionPolicy policy = SubtractionPolicy::SketchMass) {
  if (sk_a.built_mode() && *sk_a.built_mode() != mode)
    throw std::invalid_argument("join_est: sketch A was built under the other mode");
  if (sk_b.built_mode() && *sk_b.built_mode() != mode)
    throw std::invalid_argument("join_est: sketch B was built under the other mode");
  if (group_sizes.first == 0 || group_sizes.second == 0)
    throw std::invalid_argument("join_est: group size is zero");
  if (!sk_a.restored() || !sk_b.restored())
    throw std::logic_error("join_est requires restored sketches");

  double nt_a = 0.0, nt_b = 0.0;
  if (policy == SubtractionPolicy::SketchMass) {
    nt_a = detail::nt_from_sketch(sk_a, mode, fi,
                                  static_cast<double>(group_sizes.first));
    nt_b = detail::nt_from_sketch(sk_b, mode, fi,
                                  static_cast<double>(group_sizes.second));
  } else {
    const double pop_a = static_cast<double>(fi.population_sizes.first);
    const double pop_b = static_cast<double>(fi.population_sizes.second);
    const double high_a = fi.high_freq_total_a();
    const double high_b = fi.high_freq_total_b();
    // Population-level non-target mass for this mode's sketches.
    nt_a = (mode == FapMode::Low) ? high_a : pop_a - high_a;
    nt_b = (mode == FapMode::Low) ? high_b : pop_b - high_b;
    if (policy == SubtractionPolicy::GroupScaled) {
      if (pop_a > 0) nt_a *= static_cast<double>(group_sizes.first) / pop_a;
      if (pop_b > 0) nt_b *= static_cast<double>(group_sizes.second) / pop_b;
    }
  }
  const double m = static_cast<double>(sk_a.params().m);
  const double off_a = nt_a / m;
  const double off_b = nt_b / m;

  const std::uint32_t k = sk_a.params().k;
  const std::uint32_t cols = sk_a.params().m;
  std::vector<double> rows(k);
  for (std::uint32_t j = 0; j < k; ++j) {
    const auto ra = sk_a.row(j);
    const auto rb = sk_b.row(j);
    double dot = 0.0;
    for (std::uint32_t x = 0; x < cols; ++x)
      dot += (ra[x] - off_a) * (rb[x] - off_b);
    rows[j] = dot;
  }
  return median_inplace(rows);
}

// Final result of a join-size pipeline.
struct JoinEstimate {
  double value = 0.0;

  struct TwoPhaseParts {
    double low_estimate = 0.0;   // LEst, group-level
    double high_estimate = 0.0;  // HEst, group-level
    double low_scale = 1.0;      // |A||B| / (|A1||B1|)
    double high_scale = 1.0;     // |A||B| / (|A2||B2|)
  };
  std::optional<TwoPhaseParts> parts;  // set by the two-phase pipeline
};

// Builds the two restored one-phase sketches. Client i of attribute `attr`
// (0 for A, 1 for B) uses the seed derive_seed(master_seed, kTagClient,
// attr, i).
inline std::pair<PrivateSketch, PrivateSketch> build_join_sketches(
    std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
    const SketchParams& params, bool xi_disabled = false) {
  const HashFamily family = derive_family(params, xi_disabled);
  PrivateSketch sk_a(params, family);
  PrivateSketch sk_b(params, family);
  for (std::size_t i = 0; i < a.size(); ++i) {
    RandomSource rng(derive_seed(params.master_seed, kTagClient, 0, i));
    sk_a.add(client_perturb(a[i], params, family, rng));
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    RandomSource rng(derive_seed(params.master_seed, kTagClient, 1, i));
    sk_b.add(client_perturb(b[i], params, family, rng));
  }
  sk_a.restore();
  sk_b.restore();
  return {std::move(sk_a), std::move(sk_b)};
}

// One-phase pipeline: perturb every value, build one sketch per attribute,
// estimate by the median-of-rows product.
inline JoinEstimate ldp_join_sketch(std::span<const std::uint64_t> a,
                                    std::span<const std::uint64_t> b,
                                    const SketchParams& params,
                                    bool xi_disabled = false) {
  const auto [sk_a, sk_b] = build_join_sketches(a, b, params, xi_disabled);
  return JoinEstimate{sketch_join(sk_a, sk_b), std::nullopt};
}

namespace detail {

// Seeded uniform permutation of [0, n).
inline std::vector<std::size_t> seeded_permutation(std::size_t n,
                                                   std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  RandomSource rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t r = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(idx[i - 1], idx[r]);
  }
  return idx;
}

}  // namespace detail

// Everything the two-phase estimate is computed from: the phase-1 frequent
// items and the four phase-2 group sketches with their group sizes.
struct TwoPhaseSketches {
  FrequentItemSet fi;
  PrivateSketch ml_a, ml_b;  // low-frequency groups (mode L)
  PrivateSketch mh_a, mh_b;  // high-frequency groups (mode H)
  std::pair<std::uint64_t, std::uint64_t> low_sizes{0, 0};
  std::pair<std::uint64_t, std::uint64_t> high_sizes{0, 0};
  std::pair<std::uint64_t, std::uint64_t> population_sizes{0, 0};
};

// Two-phase pipeline, build stage. Phase 1 estimates frequencies from an
// r-fraction sample of each attribute and extracts FI; phase 2 splits the
// remaining users uniformly into a low-frequency group and a high-frequency
// group and builds one frequency-aware sketch per group. User-to-group
// assignment is a seeded uniform permutation. domain_hint bounds the FI
// scan; 0 means max(id)+1 over both inputs.
inline TwoPhaseSketches ldp_join_sketch_plus_build(
    std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
    const SketchParams& params, double sample_rate, double theta,
    std::uint64_t domain_hint = 0, bool xi_disabled = false) {
  if (!(sample_rate > 0.0 && sample_rate < 1.0))
    throw std::invalid_argument("sample rate must be in (0, 1)");
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("theta must be in (0, 1)");
  const HashFamily family = derive_family(params, xi_disabled);

  std::uint64_t domain = domain_hint;
  if (domain == 0) {
    for (std::uint64_t d : a) domain = std::max(domain, d + 1);
    for (std::uint64_t d : b) domain = std::max(domain, d + 1);
    if (domain == 0) throw std::invalid_argument("empty inputs");
  }

  struct Split {
    std::vector<std::size_t> sample, low_group, high_group;
  };
  auto split_users = [&](std::size_t n, std::uint64_t attr) {
    const auto n_sample = static_cast<std::size_t>(
        std::llround(sample_rate * static_cast<double>(n)));
    if (n_sample == 0 || n_sample >= n)
      throw std::invalid_argument("phase-1 sample is empty or swallows all users");
    const std::vector<std::size_t> perm = detail::seeded_permutation(
        n, derive_seed(params.master_seed, kTagPermute, attr));
    Split s;
    s.sample.assign(perm.begin(), perm.begin() + n_sample);
    const std::size_t rest = n - n_sample;
    const std::size_t n_low = (rest + 1) / 2;
    if (n_low == 0 || rest - n_low == 0)
      throw std::invalid_argument("phase-2 group is empty");
    s.low_group.assign(perm.begin() + n_sample, perm.begin() + n_sample + n_low);
    s.high_group.assign(perm.begin() + n_sample + n_low, perm.end());
    return s;
  };
  const Split split_a = split_users(a.size(), 0);
  const Split split_b = split_users(b.size(), 1);

  auto build_plain = [&](std::span<const std::uint64_t> vals,
                         const std::vector<std::size_t>& idx, std::uint64_t attr) {
    PrivateSketch sk(params, family);
    for (std::size_t i : idx) {
      RandomSource rng(derive_seed(params.master_seed, kTagClient, attr, i));
      sk.add(client_perturb(vals[i], params, family, rng));
    }
    sk.restore();
    return sk;
  };
  const PrivateSketch m1_a = build_plain(a, split_a.sample, 0);
  const PrivateSketch m1_b = build_plain(b, split_b.sample, 1);

  FrequentItemSet fi = find_frequent_items(
      m1_a, m1_b, domain, theta,
      {split_a.sample.size(), split_b.sample.size()}, {a.size(), b.size()});

  auto build_fap = [&](std::span<const std::uint64_t> vals,
                       const std::vector<std::size_t>& idx, FapMode mode,
                       std::uint64_t attr) {
    PrivateSketch sk(params, family);
    for (std::size_t i : idx) {
      RandomSource rng(derive_seed(params.master_seed, kTagClient, attr, i));
      sk.add(fap_perturb(vals[i], mode, fi, params, family, rng));
    }
    sk.restore();
    sk.set_built_mode(mode);
    return sk;
  };
  PrivateSketch ml_a = build_fap(a, split_a.low_group, FapMode::Low, 0);
  PrivateSketch ml_b = build_fap(b, split_b.low_group, FapMode::Low, 1);
  PrivateSketch mh_a = build_fap(a, split_a.high_group, FapMode::High, 0);
  PrivateSketch mh_b = build_fap(b, split_b.high_group, FapMode::High, 1);
  return TwoPhaseSketches{std::move(fi),
                          std::move(ml_a),
                          std::move(ml_b),
                          std::move(mh_a),
                          std::move(mh_b),
                          {split_a.low_group.size(), split_b.low_group.size()},
                          {split_a.high_group.size(), split_b.high_group.size()},
                          {a.size(), b.size()}};
}

// Two-phase pipeline, estimate stage: LEst and HEst via join_est, combined
// with the group-size scale factors.
inline JoinEstimate ldp_join_sketch_plus_estimate(
    const TwoPhaseSketches& tp,
    SubtractionPolicy policy = SubtractionPolicy::SketchMass) {
  const double lest =
      join_est(tp.ml_a, tp.ml_b, FapMode::Low, tp.fi, tp.low_sizes, policy);
  const double hest =
      join_est(tp.mh_a, tp.mh_b, FapMode::High, tp.fi, tp.high_sizes, policy);
  const double nm_ab = static_cast<double>(tp.population_sizes.first) *
                       static_cast<double>(tp.population_sizes.second);
  const double low_scale = nm_ab / (static_cast<double>(tp.low_sizes.first) *
                                    static_cast<double>(tp.low_sizes.second));
  const double high_scale = nm_ab / (static_cast<double>(tp.high_sizes.first) *
                                     static_cast<double>(tp.high_sizes.second));
  JoinEstimate est;
  est.value = low_scale * lest + high_scale * hest;
  est.parts = JoinEstimate::TwoPhaseParts{lest, hest, low_scale, high_scale};
  return est;
}

// Full two-phase pipeline.
inline JoinEstimate ldp_join_sketch_plus(std::span<const std::uint64_t> a,
                                         std::span<const std::uint64_t> b,
                                         const SketchParams& params,
                                         double sample_rate, double theta,
                                         std::uint64_t domain_hint = 0,
                                         SubtractionPolicy policy =
                                             SubtractionPolicy::SketchMass,
                                         bool xi_disabled = false) {
  return ldp_join_sketch_plus_estimate(
      ldp_join_sketch_plus_build(a, b, params, sample_rate, theta, domain_hint,
                                 xi_disabled),
      policy);
}

}  // namespace ldpjs
