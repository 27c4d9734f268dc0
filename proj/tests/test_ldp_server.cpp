#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "ldpjs/dataset.hpp"
#include "ldpjs/fagms.hpp"
#include "ldpjs/ldp_server.hpp"

using namespace ldpjs;

TEST_CASE("debias constant matches the randomized-response formula") {
  const SketchParams p{1, 2, std::log(3.0), 0};
  CHECK_THAT(p.debias_constant(), Catch::Matchers::WithinAbs(2.0, 1e-12));
  const SketchParams huge{1, 2, 1000.0, 0};
  CHECK_THAT(huge.debias_constant(), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("restore applies the inverse hadamard pass once") {
  // Single report (y=+1, j=0, l=0), k=1, m=2, eps huge: c_eps -> 1 and the
  // restored row is [+1, +1].
  const SketchParams params{1, 2, 1000.0, 4};
  PrivateSketch sk(params, derive_family(params));
  sk.add(PerturbedReport{+1, 0, 0});
  sk.restore();
  CHECK_THAT(sk.cell(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(sk.cell(0, 1), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(sk.report_count() == 1);
  CHECK_THROWS_AS(sk.restore(), std::logic_error);
  CHECK_THROWS_AS(sk.add(PerturbedReport{+1, 0, 0}), std::logic_error);
}

TEST_CASE("reports with out-of-range indices or signs are rejected") {
  const SketchParams params{2, 4, 1.0, 4};
  PrivateSketch sk(params, derive_family(params));
  CHECK_THROWS_AS(sk.add(PerturbedReport{+1, 2, 0}), std::out_of_range);
  CHECK_THROWS_AS(sk.add(PerturbedReport{+1, 0, 4}), std::out_of_range);
  CHECK_THROWS_AS(sk.add(PerturbedReport{0, 0, 0}), std::invalid_argument);
}

TEST_CASE("a uniform population of one value is recovered in expectation") {
  const std::size_t n = 100000;
  const SketchParams params{18, 1024, 4.0, 1234};
  const HashFamily fam = derive_family(params);
  PrivateSketch sk(params, fam);
  const std::uint64_t d = 321;
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource rng(derive_seed(params.master_seed, kTagClient, 0, i));
    sk.add(client_perturb(d, params, fam, rng));
  }
  sk.restore();
  // the frequency estimate's stddev is about c_eps * sqrt(n)
  const double sigma = params.debias_constant() * std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sk.estimate_frequency(d) - static_cast<double>(n)) < 3 * sigma);
}

TEST_CASE("empty sketch estimates zero everywhere") {
  const SketchParams params{4, 16, 1.0, 0};
  PrivateSketch sk(params, derive_family(params));
  sk.restore();
  for (std::uint64_t d = 0; d < 50; ++d) CHECK(sk.estimate_frequency(d) == 0.0);
}

TEST_CASE("absent values estimate to zero on average over re-seeded runs") {
  const std::size_t n = 2000, runs = 60;
  std::vector<double> estimates;
  for (std::size_t r = 0; r < runs; ++r) {
    const SketchParams params{6, 64, 2.0, 5000 + r};
    const HashFamily fam = derive_family(params);
    PrivateSketch sk(params, fam);
    for (std::size_t i = 0; i < n; ++i) {
      RandomSource rng(derive_seed(params.master_seed, kTagClient, 0, i));
      sk.add(client_perturb(i % 7, params, fam, rng));  // values 0..6
    }
    sk.restore();
    estimates.push_back(sk.estimate_frequency(9999));
  }
  const double mean = mean_of(estimates);
  const double sd = stddev_of(estimates);
  CHECK(std::abs(mean) < 3 * sd / std::sqrt(static_cast<double>(runs)));
}

TEST_CASE("merge obeys identity, commutativity and replay equivalence") {
  const SketchParams params{3, 32, 1.5, 9};
  const HashFamily fam = derive_family(params);

  std::vector<PerturbedReport> reports;
  RandomSource rng(14);
  for (int i = 0; i < 1000; ++i) {
    RandomSource crng(derive_seed(14, kTagClient, 0, i));
    reports.push_back(client_perturb(rng.uniform_index(40), params, fam, crng));
  }

  PrivateSketch whole(params, fam), left(params, fam), right(params, fam);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    whole.add(reports[i]);
    (i % 3 == 0 ? left : right).add(reports[i]);
  }

  const PrivateSketch lr = merge(left, right);
  const PrivateSketch rl = merge(right, left);
  CHECK(lr.counters() == rl.counters());
  CHECK(lr.counters() == whole.counters());
  CHECK(lr.report_count() == whole.report_count());

  PrivateSketch empty(params, fam);
  CHECK(merge(left, empty).counters() == left.counters());

  // any 3-way partition merges to the same sketch regardless of grouping
  PrivateSketch p1(params, fam), p2(params, fam), p3(params, fam);
  for (std::size_t i = 0; i < reports.size(); ++i)
    (i % 3 == 0 ? p1 : i % 3 == 1 ? p2 : p3).add(reports[i]);
  CHECK(merge(merge(p1, p2), p3).counters() ==
        merge(p1, merge(p2, p3)).counters());

  PrivateSketch other(SketchParams{3, 32, 1.5, 10},
                      derive_family(SketchParams{3, 32, 1.5, 10}));
  CHECK_THROWS_AS(merge(left, other), std::invalid_argument);
  PrivateSketch restored = whole;
  restored.restore();
  CHECK_THROWS_AS(merge(restored, left), std::logic_error);
}

TEST_CASE("find_frequent_items respects the threshold semantics") {
  const std::size_t n = 5000;
  const SketchParams params{8, 256, 4.0, 77};
  const HashFamily fam = derive_family(params);
  PrivateSketch sk_a(params, fam), sk_b(params, fam);
  // one dominant value plus light noise values
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource ra(derive_seed(params.master_seed, kTagClient, 0, i));
    RandomSource rb(derive_seed(params.master_seed, kTagClient, 1, i));
    sk_a.add(client_perturb(i % 10 == 0 ? i % 97 : 7, params, fam, ra));
    sk_b.add(client_perturb(i % 10 == 0 ? i % 89 : 7, params, fam, rb));
  }
  sk_a.restore();
  sk_b.restore();

  const auto all = find_frequent_items(sk_a, sk_b, 100, 1e-9, {n, n}, {n, n});
  CHECK(all.contains(7));

  const auto none = find_frequent_items(sk_a, sk_b, 100, 1.0, {n, n}, {n, n});
  CHECK(none.size() == 0);

  CHECK_THROWS_AS(find_frequent_items(sk_a, sk_b, 0, 0.1, {n, n}, {n, n}),
                  std::invalid_argument);
}

TEST_CASE("frequent-item recall stays high on skewed data") {
  // Zipf(2.0), theta = 0.001, r = 0.1: compare FI against the exact
  // population-scaled sample frequencies.
  const std::size_t n = 1000000, sample = 100000;
  const std::uint64_t domain = 10000;
  const double theta = 0.001;
  double recall_sum = 0;
  for (int run = 0; run < 10; ++run) {
    const auto data = gen_zipf(2 * sample, domain, 2.0, 900 + run);
    const std::vector<std::uint64_t> sa(data.begin(), data.begin() + sample);
    const std::vector<std::uint64_t> sb(data.begin() + sample, data.end());

    const SketchParams params{18, 1024, 4.0, 17000u + run};
    const HashFamily fam = derive_family(params);
    PrivateSketch sk_a(params, fam), sk_b(params, fam);
    for (std::size_t i = 0; i < sample; ++i) {
      RandomSource ra(derive_seed(params.master_seed, kTagClient, 0, i));
      RandomSource rb(derive_seed(params.master_seed, kTagClient, 1, i));
      sk_a.add(client_perturb(sa[i], params, fam, ra));
      sk_b.add(client_perturb(sb[i], params, fam, rb));
    }
    sk_a.restore();
    sk_b.restore();
    const auto fi = find_frequent_items(sk_a, sk_b, domain, theta,
                                        {sample, sample}, {n, n});

    std::unordered_map<std::uint64_t, std::uint64_t> fa, fb;
    for (auto d : sa) ++fa[d];
    for (auto d : sb) ++fb[d];
    const double scale = static_cast<double>(n) / sample;
    std::size_t truth = 0, hit = 0;
    for (std::uint64_t d = 0; d < domain; ++d) {
      const double ta = fa.count(d) ? fa[d] * scale : 0.0;
      const double tb = fb.count(d) ? fb[d] * scale : 0.0;
      if (ta > theta * n || tb > theta * n) {
        ++truth;
        hit += fi.contains(d);
      }
    }
    REQUIRE(truth > 0);
    recall_sum += static_cast<double>(hit) / truth;
  }
  CHECK(recall_sum / 10 >= 0.9);
}

TEST_CASE("join_est with empty FI and mode L equals the plain product") {
  const std::size_t n = 4000;
  const SketchParams params{6, 128, 2.0, 33};
  const HashFamily fam = derive_family(params);
  FrequentItemSet fi;
  fi.population_sizes = {n, n};
  fi.sample_sizes = {1, 1};

  PrivateSketch sk_a(params, fam), sk_b(params, fam);
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource ra(derive_seed(params.master_seed, kTagClient, 0, i));
    RandomSource rb(derive_seed(params.master_seed, kTagClient, 1, i));
    // empty FI, mode L: every value is a target and FAP delegates
    sk_a.add(fap_perturb(i % 50, FapMode::Low, fi, params, fam, ra));
    sk_b.add(fap_perturb(i % 30, FapMode::Low, fi, params, fam, rb));
  }
  sk_a.restore();
  sk_b.restore();
  for (auto policy : {SubtractionPolicy::SketchMass, SubtractionPolicy::GroupScaled,
                      SubtractionPolicy::PopulationScaled}) {
    CHECK(join_est(sk_a, sk_b, FapMode::Low, fi, {n, n}, policy) ==
          sketch_join(sk_a, sk_b));
  }
}

TEST_CASE("join_est removes an all-non-target population") {
  // mode H with empty FI: every value is encoded independently of its input
  // and the estimate centers on zero.
  const std::size_t n = 20000, runs = 30;
  FrequentItemSet fi;
  fi.population_sizes = {n, n};
  fi.sample_sizes = {1, 1};
  std::vector<double> estimates;
  for (std::size_t run = 0; run < runs; ++run) {
    const SketchParams params{9, 256, 2.0, 60000 + run};
    const HashFamily fam = derive_family(params);
    PrivateSketch sk_a(params, fam), sk_b(params, fam);
    for (std::size_t i = 0; i < n; ++i) {
      RandomSource ra(derive_seed(params.master_seed, kTagClient, 0, i));
      RandomSource rb(derive_seed(params.master_seed, kTagClient, 1, i));
      sk_a.add(fap_perturb(i % 40, FapMode::High, fi, params, fam, ra));
      sk_b.add(fap_perturb(i % 40, FapMode::High, fi, params, fam, rb));
    }
    sk_a.restore();
    sk_b.restore();
    estimates.push_back(join_est(sk_a, sk_b, FapMode::High, fi, {n, n}));
  }
  const double mean = mean_of(estimates);
  const double sd = stddev_of(estimates);
  CHECK(std::abs(mean) < 3 * sd / std::sqrt(static_cast<double>(runs)));
}

TEST_CASE("join_est isolates the cold side of a two-value workload") {
  // Values: hot h known to FI (exact frequency), cold c unknown. Mode L
  // groups should estimate the cold-cold join alone.
  const std::size_t n_hot = 30000, n_cold = 3000, runs = 25;
  const std::uint64_t hot = 5, cold = 11;
  const double truth = static_cast<double>(n_cold) * n_cold;
  std::vector<double> estimates;
  for (std::size_t run = 0; run < runs; ++run) {
    const SketchParams params{9, 256, 4.0, 90000 + run};
    const HashFamily fam = derive_family(params);
    FrequentItemSet fi;
    fi.items = {hot};
    fi.freq_a = {static_cast<double>(n_hot)};
    fi.freq_b = {static_cast<double>(n_hot)};
    fi.theta = 0.01;
    fi.sample_sizes = {n_hot + n_cold, n_hot + n_cold};
    fi.population_sizes = {n_hot + n_cold, n_hot + n_cold};
    PrivateSketch sk_a(params, fam), sk_b(params, fam);
    for (std::size_t i = 0; i < n_hot + n_cold; ++i) {
      const std::uint64_t d = i < n_hot ? hot : cold;
      RandomSource ra(derive_seed(params.master_seed, kTagClient, 0, i));
      RandomSource rb(derive_seed(params.master_seed, kTagClient, 1, i));
      sk_a.add(fap_perturb(d, FapMode::Low, fi, params, fam, ra));
      sk_b.add(fap_perturb(d, FapMode::Low, fi, params, fam, rb));
    }
    sk_a.restore();
    sk_b.restore();
    estimates.push_back(join_est(sk_a, sk_b, FapMode::Low, fi,
                                 {n_hot + n_cold, n_hot + n_cold}));
  }
  const double mean = mean_of(estimates);
  const double sd = stddev_of(estimates);
  CHECK(std::abs(mean - truth) < 3 * sd / std::sqrt(static_cast<double>(runs)));
}

TEST_CASE("join_est rejects mode mismatches and empty groups") {
  const std::size_t n = 100;
  const SketchParams params{2, 8, 1.0, 3};
  const HashFamily fam = derive_family(params);
  FrequentItemSet fi;
  fi.population_sizes = {n, n};
  fi.sample_sizes = {1, 1};
  PrivateSketch sk_a(params, fam), sk_b(params, fam);
  sk_a.restore();
  sk_b.restore();
  PrivateSketch tagged = sk_a;
  tagged.set_built_mode(FapMode::High);
  CHECK_THROWS_AS(join_est(tagged, sk_b, FapMode::Low, fi, {n, n}),
                  std::invalid_argument);
  CHECK_THROWS_AS(join_est(sk_a, sk_b, FapMode::Low, fi, {0, n}),
                  std::invalid_argument);
}

TEST_CASE("one-phase pipeline recovers a degenerate self join") {
  // A = B = {d} x n with a large budget: estimate within 5% of n^2 on a
  // 20-run mean.
  const std::size_t n = 20000, runs = 20;
  const double truth = static_cast<double>(n) * n;
  double sum = 0;
  std::vector<std::uint64_t> vals(n, 12345);
  for (std::size_t run = 0; run < runs; ++run) {
    const SketchParams params{18, 1024, 8.0, 41000 + run};
    sum += ldp_join_sketch(vals, vals, params).value;
  }
  CHECK(std::abs(sum / runs - truth) <= 0.05 * truth);
}

TEST_CASE("one-phase pipeline centers disjoint supports inside the error band") {
  const std::size_t n = 10000, runs = 20;
  std::vector<std::uint64_t> va(n), vb(n);
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = i % 100;         // ids 0..99
    vb[i] = 1000 + i % 100;  // ids 1000..1099
  }
  double sum = 0;
  double c2 = 0;
  for (std::size_t run = 0; run < runs; ++run) {
    const SketchParams params{18, 1024, 4.0, 52000 + run};
    c2 = params.debias_constant() * params.debias_constant();
    sum += ldp_join_sketch(va, vb, params).value;
  }
  const double fuzz = (18 * c2 - 1) / 2;
  const double band =
      (4.0 / std::sqrt(1024.0)) * (n + fuzz) * (n + fuzz);
  CHECK(std::abs(sum / runs) < band);
}

TEST_CASE("two-phase pipeline reduces to scaled one-phase estimates on uniform data") {
  // Uniform data with theta far above every frequency: FI comes out empty
  // and both halves reduce to plain sketches.
  const std::size_t n = 30000, runs = 20;
  const std::uint64_t domain = 200;
  std::vector<double> estimates;
  const auto pool = gen_zipf(2 * n, domain, 0.01, 321);  // near-uniform
  const std::vector<std::uint64_t> va(pool.begin(), pool.begin() + n);
  const std::vector<std::uint64_t> vb(pool.begin() + n, pool.end());
  const double truth = static_cast<double>(true_join_size(va, vb));
  for (std::size_t run = 0; run < runs; ++run) {
    const SketchParams params{12, 512, 4.0, 71000 + run};
    const auto est = ldp_join_sketch_plus(va, vb, params, 0.1, 0.2, domain);
    REQUIRE(est.parts.has_value());
    estimates.push_back(est.value);
  }
  const double mean = mean_of(estimates);
  const double sd = stddev_of(estimates);
  CHECK(std::abs(mean - truth) < 3 * sd / std::sqrt(static_cast<double>(runs)));
}

TEST_CASE("two-phase pipeline is deterministic given its seeds") {
  const std::size_t n = 5000;
  const auto pool = gen_zipf(2 * n, 500, 1.3, 99);
  const std::vector<std::uint64_t> va(pool.begin(), pool.begin() + n);
  const std::vector<std::uint64_t> vb(pool.begin() + n, pool.end());
  const SketchParams params{6, 128, 2.0, 2718};
  const auto e1 = ldp_join_sketch_plus(va, vb, params, 0.1, 0.01, 500);
  const auto e2 = ldp_join_sketch_plus(va, vb, params, 0.1, 0.01, 500);
  CHECK(e1.value == e2.value);
  CHECK(e1.parts->low_estimate == e2.parts->low_estimate);
  CHECK(e1.parts->high_estimate == e2.parts->high_estimate);
  CHECK(e1.parts->low_scale == e2.parts->low_scale);
  CHECK(e1.parts->high_scale == e2.parts->high_scale);
}

TEST_CASE("two-phase pipeline validates rates and group sizes") {
  const std::vector<std::uint64_t> tiny{1, 2};
  const SketchParams params{2, 8, 1.0, 5};
  CHECK_THROWS_AS(ldp_join_sketch_plus(tiny, tiny, params, 0.0, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(ldp_join_sketch_plus(tiny, tiny, params, 0.1, 1.0),
                  std::invalid_argument);
  // 2 users cannot fill a sample plus two non-empty groups
  CHECK_THROWS_AS(ldp_join_sketch_plus(tiny, tiny, params, 0.4, 0.1),
                  std::invalid_argument);
}

TEST_CASE("sketch snapshots round-trip bit-exactly") {
  const std::size_t n = 3000;
  const SketchParams params{5, 64, 1.7, 31415};
  const HashFamily fam = derive_family(params);
  PrivateSketch sk(params, fam);
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource rng(derive_seed(params.master_seed, kTagClient, 0, i));
    sk.add(client_perturb(i % 23, params, fam, rng));
  }
  sk.restore();

  std::stringstream ss;
  sk.save(ss);
  // header: k u32 + m u32 + eps f64 + seed u64 + flag u8 + count u64
  CHECK(ss.str().size() == 4 + 4 + 8 + 8 + 1 + 8 + 5 * 64 * sizeof(double));
  const PrivateSketch back = PrivateSketch::load(ss);
  CHECK(back.params() == params);
  CHECK(back.restored());
  CHECK(back.report_count() == n);
  CHECK(back.counters() == sk.counters());
  for (std::uint64_t d = 0; d < 23; ++d)
    CHECK(back.estimate_frequency(d) == sk.estimate_frequency(d));

  std::stringstream short_stream(ss.str().substr(0, 20));
  CHECK_THROWS_AS(PrivateSketch::load(short_stream), std::runtime_error);
}
