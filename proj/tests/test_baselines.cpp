#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <unordered_map>
#include <vector>

#include "ldpjs/baselines.hpp"
#include "ldpjs/fagms.hpp"
#include "ldpjs/stats.hpp"

using namespace ldpjs;

TEST_CASE("k-RR parameters satisfy the defining identities") {
  for (double eps : {0.0, 0.5, 1.0, 4.0}) {
    for (std::uint64_t d : {2ull, 10ull, 1000ull}) {
      const KrrParams p = KrrParams::create(eps, d);
      CHECK_THAT(p.p + (d - 1) * p.q, Catch::Matchers::WithinAbs(1.0, 1e-12));
      CHECK_THAT(p.p / p.q, Catch::Matchers::WithinRel(std::exp(eps), 1e-12));
    }
  }
  const KrrParams binary = KrrParams::create(0.0, 2);
  CHECK(binary.p == 0.5);
  CHECK(binary.q == 0.5);
  CHECK_THROWS_AS(KrrParams::create(1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(KrrParams::create(-1.0, 10), std::invalid_argument);
}

TEST_CASE("k-RR keeps the value at huge budgets and rejects foreign values") {
  const KrrParams p = KrrParams::create(50.0, 10);
  RandomSource rng(5);
  for (int t = 0; t < 10000; ++t) CHECK(krr_perturb(7, p, rng) == 7);
  CHECK_THROWS_AS(krr_perturb(10, p, rng), std::out_of_range);
}

TEST_CASE("k-RR keep rate matches the analytic probability") {
  const KrrParams p = KrrParams::create(1.0, 10);
  const double expected = std::exp(1.0) / (std::exp(1.0) + 9.0);
  RandomSource rng(6);
  const std::size_t n = 100000;
  std::size_t kept = 0;
  for (std::size_t t = 0; t < n; ++t) kept += krr_perturb(3, p, rng) == 3;
  const double sigma = std::sqrt(n * expected * (1 - expected));
  CHECK(std::abs(static_cast<double>(kept) - expected * n) < 3 * sigma);
}

TEST_CASE("calibrated totals are exact and estimates unbiased") {
  const KrrParams p = KrrParams::create(1.5, 50);
  const std::size_t n = 20000;
  std::vector<std::uint64_t> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = i % 7;  // support {0..6}

  // sum over the whole domain of calibrated estimates equals n exactly
  RandomSource rng(77);
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  for (std::uint64_t v : values) ++counts[krr_perturb(v, p, rng)];
  double total = 0;
  for (std::uint64_t d = 0; d < 50; ++d) {
    const auto it = counts.find(d);
    total += krr_calibrate(it == counts.end() ? 0 : it->second, n, p);
  }
  CHECK_THAT(total, Catch::Matchers::WithinRel(static_cast<double>(n), 1e-9));

  // E[f~(d)] = f(d): Monte-Carlo over re-seeded perturbations
  const std::size_t runs = 60;
  std::vector<double> estimates;
  for (std::size_t r = 0; r < runs; ++r) {
    RandomSource rr(derive_seed(4000, r));
    std::uint64_t c3 = 0;
    for (std::uint64_t v : values) c3 += krr_perturb(v, p, rr) == 3;
    estimates.push_back(krr_calibrate(c3, n, p));
  }
  const double truth = static_cast<double>(n) / 7;
  const double mean = mean_of(estimates);
  const double sd = stddev_of(estimates);
  CHECK(std::abs(mean - truth) < 4 * sd / std::sqrt(static_cast<double>(runs)));
}

TEST_CASE("join estimate is exact without noise and unbiased with it") {
  const std::size_t n = 5000;
  std::vector<std::uint64_t> va(n), vb(n);
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = i % 20;
    vb[i] = i % 30;
  }
  const double truth = static_cast<double>(true_join_size(va, vb));

  // huge budget: perturbation is the identity and calibration exact
  const KrrParams noiseless = KrrParams::create(60.0, 30);
  std::vector<std::uint64_t> ra(va), rb(vb);
  CHECK_THAT(krr_join_estimate(ra, rb, noiseless),
             Catch::Matchers::WithinRel(truth, 1e-6));

  const KrrParams p = KrrParams::create(2.0, 30);
  const std::size_t runs = 50;
  std::vector<double> estimates;
  for (std::size_t r = 0; r < runs; ++r) {
    RandomSource rng(derive_seed(8100, r));
    for (std::size_t i = 0; i < n; ++i) ra[i] = krr_perturb(va[i], p, rng);
    for (std::size_t i = 0; i < n; ++i) rb[i] = krr_perturb(vb[i], p, rng);
    estimates.push_back(krr_join_estimate(ra, rb, p));
  }
  const double mean = mean_of(estimates);
  const double sd = stddev_of(estimates);
  CHECK(std::abs(mean - truth) < 4 * sd / std::sqrt(static_cast<double>(runs)));
}

TEST_CASE("degenerate calibration is reported as an error") {
  const KrrParams p = KrrParams::create(0.0, 10);  // p == q
  const std::vector<std::uint64_t> r{1, 2, 3};
  CHECK_THROWS_AS(krr_join_estimate(r, r, p), std::invalid_argument);
  CHECK_THROWS_AS(krr_calibrate(1, 3, p), std::invalid_argument);
}
