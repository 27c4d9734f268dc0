#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ldpjs/hashing.hpp"
#include "ldpjs/ldp_server.hpp"
#include "ldpjs/params.hpp"
#include "ldpjs/report.hpp"
#include "ldpjs/rng.hpp"
#include "ldpjs/stats.hpp"

// Chain-join extension: a middle table with two join attributes reports a
// single perturbed sample of the two-sided Hadamard transform of its
// (h_A(a), h_B(b)) one-hot encoding, signed by xi_A(a)*xi_B(b). The server
// keeps k tensors of shape m1 x m2 and restores each with a Hadamard pass on
// both sides. A whole tuple is covered by one report under one epsilon.

namespace ldpjs {

// Two-attribute report: one draw of (j, l1, l2) plus the flipped sign.
// Consumes exactly four draws (j, l1, l2, b).
inline PerturbedReport2D client_perturb_2d(std::uint64_t a, std::uint64_t b,
                                           const SketchParams& params_a,
                                           const SketchParams& params_b,
                                           const HashFamily& family_a,
                                           const HashFamily& family_b,
                                           RandomSource& rng) {
  if (params_a.k != params_b.k || params_a.epsilon != params_b.epsilon)
    throw std::invalid_argument("2-dim report: k and epsilon must be shared");
  const std::uint32_t j =
      static_cast<std::uint32_t>(rng.uniform_index(params_a.k));
  const std::uint32_t l1 =
      static_cast<std::uint32_t>(rng.uniform_index(params_a.m));
  const std::uint32_t l2 =
      static_cast<std::uint32_t>(rng.uniform_index(params_b.m));
  const HashPair& ha = family_a.row(j);
  const HashPair& hb = family_b.row(j);
  const int w = hadamard_entry_unchecked(ha.bucket(a), l1) * ha.sign(a) *
                hb.sign(b) * hadamard_entry_unchecked(l2, hb.bucket(b));
  const int flip = rng.flip_sign(params_a.flip_probability());
  return PerturbedReport2D{static_cast<std::int8_t>(flip * w),
                           static_cast<std::uint16_t>(j), l1, l2};
}

class PrivateSketch2D {
 public:
  PrivateSketch2D(SketchParams params_a, SketchParams params_b,
                  HashFamily family_a, HashFamily family_b)
      : params_a_(params_a),
        params_b_(params_b),
        family_a_(std::move(family_a)),
        family_b_(std::move(family_b)),
        counters_(static_cast<std::size_t>(params_a.k) * params_a.m * params_b.m,
                  0.0),
        scale_(static_cast<double>(params_a.k) * params_a.debias_constant()) {
    params_a_.validate();
    params_b_.validate();
    if (params_a_.k != params_b_.k || params_a_.epsilon != params_b_.epsilon)
      throw std::invalid_argument("2-dim sketch: k and epsilon must be shared");
    if (!(family_a_.params() == params_a_) || !(family_b_.params() == params_b_))
      throw std::invalid_argument("2-dim sketch params and families disagree");
  }

  // Counters hold raw signed report sums until restore applies the debias
  // scale, which keeps pre-restore merges cell-exact.
  void add(const PerturbedReport2D& r) {
    if (restored_) throw std::logic_error("cannot add to a restored sketch");
    if (r.j >= params_a_.k || r.l1 >= params_a_.m || r.l2 >= params_b_.m)
      throw std::out_of_range("report indices out of range");
    if (r.y != -1 && r.y != 1)
      throw std::invalid_argument("report sign must be -1 or +1");
    counters_[offset(r.j, r.l1, r.l2)] += static_cast<double>(r.y);
    ++n_reports_;
  }

  // Restores each tensor by M~ = H_{m1}^T * M * H_{m2}^T: a Hadamard pass
  // along the first index, then one along the second.
  void restore() {
    if (restored_) throw std::logic_error("sketch already restored");
    for (double& c : counters_) c *= scale_;
    const std::uint32_t m1 = params_a_.m;
    const std::uint32_t m2 = params_b_.m;
    std::vector<double> col(m1);
    for (std::uint32_t j = 0; j < params_a_.k; ++j) {
      double* t = counters_.data() + static_cast<std::size_t>(j) * m1 * m2;
      for (std::uint32_t x2 = 0; x2 < m2; ++x2) {
        for (std::uint32_t x1 = 0; x1 < m1; ++x1)
          col[x1] = t[static_cast<std::size_t>(x1) * m2 + x2];
        detail::fwht(col.data(), m1);
        for (std::uint32_t x1 = 0; x1 < m1; ++x1)
          t[static_cast<std::size_t>(x1) * m2 + x2] = col[x1];
      }
      for (std::uint32_t x1 = 0; x1 < m1; ++x1)
        detail::fwht(t + static_cast<std::size_t>(x1) * m2, m2);
    }
    restored_ = true;
  }

  bool restored() const noexcept { return restored_; }
  std::uint64_t report_count() const noexcept { return n_reports_; }
  const SketchParams& params_a() const noexcept { return params_a_; }
  const SketchParams& params_b() const noexcept { return params_b_; }
  const HashFamily& family_a() const noexcept { return family_a_; }
  const HashFamily& family_b() const noexcept { return family_b_; }

  double cell(std::uint32_t j, std::uint32_t x1, std::uint32_t x2) const {
    return counters_.at(offset(j, x1, x2));
  }

  std::span<const double> slab(std::uint32_t j, std::uint32_t x1) const {
    return {counters_.data() + offset(j, x1, 0), params_b_.m};
  }

  void merge_from(const PrivateSketch2D& other) {
    if (restored_ || other.restored_)
      throw std::logic_error("merge requires both sketches pre-restore");
    if (!(params_a_ == other.params_a_) || !(params_b_ == other.params_b_) ||
        !(family_a_ == other.family_a_) || !(family_b_ == other.family_b_))
      throw std::invalid_argument("merge: sketch params or families differ");
    for (std::size_t i = 0; i < counters_.size(); ++i)
      counters_[i] += other.counters_[i];
    n_reports_ += other.n_reports_;
  }

 private:
  std::size_t offset(std::uint32_t j, std::uint32_t x1, std::uint32_t x2) const {
    return (static_cast<std::size_t>(j) * params_a_.m + x1) * params_b_.m + x2;
  }

  SketchParams params_a_, params_b_;
  HashFamily family_a_, family_b_;
  std::vector<double> counters_;
  double scale_;
  std::uint64_t n_reports_ = 0;
  bool restored_ = false;
};

inline PrivateSketch2D prisk_build_2d(std::span<const PerturbedReport2D> reports,
                                      const SketchParams& params_a,
                                      const SketchParams& params_b,
                                      const HashFamily& family_a,
                                      const HashFamily& family_b) {
  PrivateSketch2D sk(params_a, params_b, family_a, family_b);
  for (const auto& r : reports) sk.add(r);
  sk.restore();
  return sk;
}

// 3-way chain estimate: median over rows of
// sum_{l1,l2} M1[j,l1] * M2[j,l1,l2] * M3[j,l2], evaluated vector-matrix-
// vector in O(m1*m2) per row.
inline double chain_join_est(const PrivateSketch& m1, const PrivateSketch2D& m2,
                             const PrivateSketch& m3) {
  if (!(m1.family() == m2.family_a()) || !(m3.family() == m2.family_b()))
    throw std::invalid_argument("chain join: hash families differ");
  if (!m1.restored() || !m2.restored() || !m3.restored())
    throw std::logic_error("chain join requires restored sketches");
  const std::uint32_t k = m1.params().k;
  const std::uint32_t c1 = m1.params().m;
  const std::uint32_t c2 = m3.params().m;
  std::vector<double> rows(k);
  for (std::uint32_t j = 0; j < k; ++j) {
    const auto v1 = m1.row(j);
    const auto v3 = m3.row(j);
    double est = 0.0;
    for (std::uint32_t x1 = 0; x1 < c1; ++x1) {
      const auto mid = m2.slab(j, x1);
      double inner = 0.0;
      for (std::uint32_t x2 = 0; x2 < c2; ++x2) inner += mid[x2] * v3[x2];
      est += v1[x1] * inner;
    }
    rows[j] = est;
  }
  return median_inplace(rows);
}

// 4-way chain: two middle tensors; contracted right to left.
inline double chain_join_est(const PrivateSketch& m1, const PrivateSketch2D& m2,
                             const PrivateSketch2D& m3, const PrivateSketch& m4) {
  if (!(m1.family() == m2.family_a()) || !(m2.family_b() == m3.family_a()) ||
      !(m4.family() == m3.family_b()))
    throw std::invalid_argument("chain join: hash families differ");
  if (!m1.restored() || !m2.restored() || !m3.restored() || !m4.restored())
    throw std::logic_error("chain join requires restored sketches");
  const std::uint32_t k = m1.params().k;
  const std::uint32_t c1 = m1.params().m;
  const std::uint32_t c2 = m3.params_a().m;
  const std::uint32_t c3 = m4.params().m;
  std::vector<double> rows(k);
  std::vector<double> t(c2), u(c1);
  for (std::uint32_t j = 0; j < k; ++j) {
    const auto v1 = m1.row(j);
    const auto v4 = m4.row(j);
    for (std::uint32_t x2 = 0; x2 < c2; ++x2) {
      const auto slab = m3.slab(j, x2);
      double inner = 0.0;
      for (std::uint32_t x3 = 0; x3 < c3; ++x3) inner += slab[x3] * v4[x3];
      t[x2] = inner;
    }
    for (std::uint32_t x1 = 0; x1 < c1; ++x1) {
      const auto slab = m2.slab(j, x1);
      double inner = 0.0;
      for (std::uint32_t x2 = 0; x2 < c2; ++x2) inner += slab[x2] * t[x2];
      u[x1] = inner;
    }
    double est = 0.0;
    for (std::uint32_t x1 = 0; x1 < c1; ++x1) est += v1[x1] * u[x1];
    rows[j] = est;
  }
  return median_inplace(rows);
}

// Exact chain-join counts by frequency maps; ground truth for every
// multiway estimate.
inline std::uint64_t true_chain_join(
    std::span<const std::uint64_t> t1,
    std::span<const std::pair<std::uint64_t, std::uint64_t>> t2,
    std::span<const std::uint64_t> t3) {
  std::unordered_map<std::uint64_t, std::uint64_t> f1, f3;
  for (std::uint64_t d : t1) ++f1[d];
  for (std::uint64_t d : t3) ++f3[d];
  std::uint64_t join = 0;
  for (const auto& [a, b] : t2) {
    const auto ia = f1.find(a);
    if (ia == f1.end()) continue;
    const auto ib = f3.find(b);
    if (ib == f3.end()) continue;
    join += ia->second * ib->second;
  }
  return join;
}

inline std::uint64_t true_chain_join(
    std::span<const std::uint64_t> t1,
    std::span<const std::pair<std::uint64_t, std::uint64_t>> t2,
    std::span<const std::pair<std::uint64_t, std::uint64_t>> t3,
    std::span<const std::uint64_t> t4) {
  std::unordered_map<std::uint64_t, std::uint64_t> f1, f4;
  for (std::uint64_t d : t1) ++f1[d];
  for (std::uint64_t d : t4) ++f4[d];
  // g(b) = sum_a f1(a) * f2(a, b)
  std::unordered_map<std::uint64_t, std::uint64_t> g;
  for (const auto& [a, b] : t2) {
    const auto ia = f1.find(a);
    if (ia != f1.end()) g[b] += ia->second;
  }
  std::uint64_t join = 0;
  for (const auto& [b, c] : t3) {
    const auto ib = g.find(b);
    if (ib == g.end()) continue;
    const auto ic = f4.find(c);
    if (ic == f4.end()) continue;
    join += ib->second * ic->second;
  }
  return join;
}

// Restored sketches of a 3-way chain T1(A) ⋈ T2(A,B) ⋈ T3(B).
struct ChainSketches {
  PrivateSketch m1;
  PrivateSketch2D m2;
  PrivateSketch m3;
};

// Builds the three chain sketches with derived per-client seeds, mirroring
// build_join_sketches. Attribute tags: 0 for T1, 1 for T3, 2 for the middle
// table's tuples.
inline ChainSketches build_chain_sketches(
    std::span<const std::uint64_t> t1,
    std::span<const std::pair<std::uint64_t, std::uint64_t>> t2,
    std::span<const std::uint64_t> t3, const SketchParams& params_a,
    const SketchParams& params_b) {
  const HashFamily family_a = derive_family(params_a);
  const HashFamily family_b = derive_family(params_b);
  PrivateSketch m1(params_a, family_a);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    RandomSource rng(derive_seed(params_a.master_seed, kTagClient, 0, i));
    m1.add(client_perturb(t1[i], params_a, family_a, rng));
  }
  PrivateSketch m3(params_b, family_b);
  for (std::size_t i = 0; i < t3.size(); ++i) {
    RandomSource rng(derive_seed(params_b.master_seed, kTagClient, 1, i));
    m3.add(client_perturb(t3[i], params_b, family_b, rng));
  }
  PrivateSketch2D m2(params_a, params_b, family_a, family_b);
  for (std::size_t i = 0; i < t2.size(); ++i) {
    RandomSource rng(derive_seed(params_a.master_seed, kTagClient, 2, i));
    m2.add(client_perturb_2d(t2[i].first, t2[i].second, params_a, params_b,
                             family_a, family_b, rng));
  }
  m1.restore();
  m2.restore();
  m3.restore();
  return ChainSketches{std::move(m1), std::move(m2), std::move(m3)};
}

// End-to-end 3-way pipeline.
inline double ldp_chain_join(
    std::span<const std::uint64_t> t1,
    std::span<const std::pair<std::uint64_t, std::uint64_t>> t2,
    std::span<const std::uint64_t> t3, const SketchParams& params_a,
    const SketchParams& params_b) {
  const ChainSketches cs = build_chain_sketches(t1, t2, t3, params_a, params_b);
  return chain_join_est(cs.m1, cs.m2, cs.m3);
}

// Closed-form law of client_perturb_2d on the unnormalized weight scale of
// client_report_weight: weight A = e^eps when y matches the unflipped sign
// product, 1 otherwise. Used by the privacy verifier.
inline double report_weight_2d(std::uint64_t a, std::uint64_t b, int y,
                               std::uint32_t j, std::uint32_t l1,
                               std::uint32_t l2, const SketchParams& params_a,
                               const SketchParams& params_b,
                               const HashFamily& family_a,
                               const HashFamily& family_b) {
  if (y != -1 && y != 1) throw std::invalid_argument("y must be -1 or +1");
  if (j >= params_a.k || l1 >= params_a.m || l2 >= params_b.m)
    throw std::out_of_range("report indices out of range");
  const HashPair& ha = family_a.row(j);
  const HashPair& hb = family_b.row(j);
  const int w = hadamard_entry_unchecked(ha.bucket(a), l1) * ha.sign(a) *
                hb.sign(b) * hadamard_entry_unchecked(l2, hb.bucket(b));
  return y == w ? std::exp(params_a.epsilon) : 1.0;
}

}  // namespace ldpjs
