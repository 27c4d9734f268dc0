#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ldpjs/baselines.hpp"
#include "ldpjs/dataset.hpp"
#include "ldpjs/fagms.hpp"
#include "ldpjs/ldp_server.hpp"
#include "ldpjs/multiway.hpp"
#include "ldpjs/params.hpp"
#include "ldpjs/rng.hpp"

// Experiment driver: builds a workload once per config, runs t repetitions
// with re-seeded mechanisms, and reports AE/RE (plus MSE for frequency
// tasks) against the exact join size. Every byte of the CSV output is a
// function of (config, seed); wall-clock timings are returned in the record
// and printed by the CLI but deliberately kept out of the CSV.

namespace ldpjs {

enum class Method : std::uint8_t { Fagms, Ldpjs, LdpjsPlus, Krr, Multiway };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Fagms: return "fagms";
    case Method::Ldpjs: return "ldpjs";
    case Method::LdpjsPlus: return "ldpjs_plus";
    case Method::Krr: return "krr";
    case Method::Multiway: return "multiway";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "fagms") return Method::Fagms;
  if (s == "ldpjs") return Method::Ldpjs;
  if (s == "ldpjs_plus") return Method::LdpjsPlus;
  if (s == "krr") return Method::Krr;
  if (s == "multiway") return Method::Multiway;
  throw std::invalid_argument("unknown method: " + s);
}

struct DatasetSpec {
  enum class Kind : std::uint8_t { Zipf, Gaussian, File };
  Kind kind = Kind::Zipf;
  double alpha = 1.5;          // zipf skew
  double mu = 0.0;             // gaussian mean
  double sigma = 1.0;          // gaussian stddev
  std::string path;            // values file (T1 for multiway)
  std::string path_mid;        // pairs file, multiway middle table
  std::string path_b;          // values file for the other side (T3)

  std::string describe() const {
    char buf[160];
    switch (kind) {
      case Kind::Zipf:
        std::snprintf(buf, sizeof buf, "zipf(alpha=%.17g)", alpha);
        return buf;
      case Kind::Gaussian:
        std::snprintf(buf, sizeof buf, "gaussian(mu=%.17g;sigma=%.17g)", mu, sigma);
        return buf;
      case Kind::File:
        return "file(" + path + ")";
    }
    return "?";
  }
};

struct ExperimentConfig {
  Method method = Method::Ldpjs;
  DatasetSpec dataset;                     // attribute A (and defaults for B)
  std::optional<DatasetSpec> dataset_b;    // attribute B override
  std::size_t n = 100000;                  // values per attribute (generators)
  std::uint64_t domain = 10000;            // id domain; 0 = derive from files
  std::uint32_t k = 18;
  std::uint32_t m = 1024;
  double epsilon = 4.0;
  double rate = 0.1;    // phase-1 sample rate (ldpjs_plus)
  double theta = 0.001; // frequency threshold fraction (ldpjs_plus)
  std::uint32_t reps = 1;
  std::uint64_t seed = 0;
  std::string out;      // CSV path; empty = no file output
  bool xi_disabled = false;   // Count-Mean-Sketch mode (drops the sign hash)
  bool compute_mse = false;   // frequency-estimation MSE (ldpjs / krr)
  std::size_t threads = 0;    // 0 = hardware concurrency

  SketchParams sketch_params(std::uint64_t master_seed) const {
    return SketchParams{k, m, epsilon, master_seed};
  }

  void validate() const {
    if (reps == 0) throw std::invalid_argument("reps must be >= 1");
    if (method != Method::Krr) sketch_params(0).validate();
    const bool generated = dataset.kind != DatasetSpec::Kind::File;
    if (generated && n == 0) throw std::invalid_argument("n must be >= 1");
    if (generated && domain == 0)
      throw std::invalid_argument("generated datasets need a domain size");
    if (method == Method::LdpjsPlus) {
      if (!(rate > 0.0 && rate < 1.0))
        throw std::invalid_argument("rate must be in (0, 1)");
      if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("theta must be in (0, 1)");
    }
  }
};

struct MetricsRecord {
  double true_join = 0.0;
  std::vector<double> estimates;  // one per repetition, in repetition order
  double ae = 0.0;                // (1/t) sum |J - J^|
  double re = 0.0;                // (1/t) sum |J - J^| / J
  std::optional<double> mse;      // frequency tasks only
  double build_ms = 0.0;          // mean per repetition
  double query_ms = 0.0;          // mean per repetition
  double bits_per_client = 0.0;
  std::uint32_t completed_reps = 0;
  std::size_t n_attribute_a = 0;  // values actually used (files may differ from cfg.n)
  std::uint64_t domain_used = 0;
};

namespace detail {

inline constexpr std::uint64_t kTagWorkload = 0x776f726bull;

struct Workload {
  std::vector<std::uint64_t> a, b;                          // two-way
  std::vector<std::pair<std::uint64_t, std::uint64_t>> mid; // multiway T2
  std::vector<std::uint64_t> t3;                            // multiway T3
  std::uint64_t domain = 0;
};

inline std::vector<std::uint64_t> generate(const DatasetSpec& spec, std::size_t n,
                                           std::uint64_t domain,
                                           std::uint64_t seed) {
  switch (spec.kind) {
    case DatasetSpec::Kind::Zipf:
      return gen_zipf(n, domain, spec.alpha, seed);
    case DatasetSpec::Kind::Gaussian:
      return gen_gaussian(n, domain, spec.mu, spec.sigma, seed);
    case DatasetSpec::Kind::File:
      return load_values(spec.path);
  }
  throw std::logic_error("unreachable");
}

inline Workload make_workload(const ExperimentConfig& cfg) {
  Workload w;
  const bool is_file = cfg.dataset.kind == DatasetSpec::Kind::File;
  if (cfg.method == Method::Multiway) {
    if (is_file) {
      w.a = load_values(cfg.dataset.path);
      w.mid = load_pairs(cfg.dataset.path_mid);
      w.t3 = load_values(cfg.dataset.path_b);
    } else {
      // Two 2n pools per join attribute: the same rank-to-id map within an
      // attribute, independent halves across tables.
      auto pool_a = generate(cfg.dataset, 2 * cfg.n, cfg.domain,
                             derive_seed(cfg.seed, kTagWorkload, 3));
      const DatasetSpec& spec_b = cfg.dataset_b ? *cfg.dataset_b : cfg.dataset;
      auto pool_b = generate(spec_b, 2 * cfg.n, cfg.domain,
                             derive_seed(cfg.seed, kTagWorkload, 4));
      w.a.assign(pool_a.begin(), pool_a.begin() + cfg.n);
      w.t3.assign(pool_b.begin() + cfg.n, pool_b.end());
      w.mid.resize(cfg.n);
      for (std::size_t i = 0; i < cfg.n; ++i)
        w.mid[i] = {pool_a[cfg.n + i], pool_b[i]};
    }
  } else if (cfg.dataset_b) {
    w.a = generate(cfg.dataset, cfg.n, cfg.domain,
                   derive_seed(cfg.seed, kTagWorkload, 1));
    w.b = generate(*cfg.dataset_b, cfg.n, cfg.domain,
                   derive_seed(cfg.seed, kTagWorkload, 2));
  } else if (is_file) {
    w.a = load_values(cfg.dataset.path);
    w.b = cfg.dataset.path_b.empty() ? w.a : load_values(cfg.dataset.path_b);
  } else {
    // One 2n pool: both attributes share the rank-to-id map and are
    // independent i.i.d. halves of the same distribution.
    auto pool = generate(cfg.dataset, 2 * cfg.n, cfg.domain,
                         derive_seed(cfg.seed, kTagWorkload, 0));
    w.a.assign(pool.begin(), pool.begin() + cfg.n);
    w.b.assign(pool.begin() + cfg.n, pool.end());
  }

  w.domain = cfg.domain;
  if (w.domain == 0) {
    for (std::uint64_t d : w.a) w.domain = std::max(w.domain, d + 1);
    for (std::uint64_t d : w.b) w.domain = std::max(w.domain, d + 1);
    for (const auto& [x, y] : w.mid)
      w.domain = std::max({w.domain, x + 1, y + 1});
    for (std::uint64_t d : w.t3) w.domain = std::max(w.domain, d + 1);
  }
  return w;
}

struct RepResult {
  double estimate = 0.0;
  double build_ms = 0.0;
  double query_ms = 0.0;
  std::optional<double> mse;
};

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

inline std::optional<double> frequency_mse(
    const std::unordered_map<std::uint64_t, std::uint64_t>& truth,
    const std::function<double(std::uint64_t)>& estimate) {
  if (truth.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& [d, f] : truth) {
    const double e = estimate(d) - static_cast<double>(f);
    s += e * e;
  }
  return s / static_cast<double>(truth.size());
}

inline RepResult run_one_rep(const ExperimentConfig& cfg, const Workload& w,
                             std::uint64_t master_seed) {
  RepResult res;
  const auto t0 = std::chrono::steady_clock::now();
  std::unordered_map<std::uint64_t, std::uint64_t> freq_a;
  if (cfg.compute_mse &&
      (cfg.method == Method::Ldpjs || cfg.method == Method::Krr)) {
    for (std::uint64_t d : w.a) ++freq_a[d];
  }

  switch (cfg.method) {
    case Method::Fagms: {
      const HashFamily family =
          derive_family(cfg.sketch_params(master_seed), cfg.xi_disabled);
      FagmsSketch sa(family), sb(family);
      for (std::uint64_t d : w.a) sa.insert(d);
      for (std::uint64_t d : w.b) sb.insert(d);
      res.build_ms = ms_since(t0);
      const auto t1 = std::chrono::steady_clock::now();
      res.estimate = fagms_join(sa, sb);
      res.query_ms = ms_since(t1);
      break;
    }
    case Method::Ldpjs: {
      const SketchParams params = cfg.sketch_params(master_seed);
      const auto sketches =
          build_join_sketches(w.a, w.b, params, cfg.xi_disabled);
      res.build_ms = ms_since(t0);
      const auto t1 = std::chrono::steady_clock::now();
      res.estimate = sketch_join(sketches.first, sketches.second);
      res.query_ms = ms_since(t1);
      if (!freq_a.empty())
        res.mse = frequency_mse(freq_a, [&sketches](std::uint64_t d) {
          return sketches.first.estimate_frequency(d);
        });
      break;
    }
    case Method::LdpjsPlus: {
      const SketchParams params = cfg.sketch_params(master_seed);
      const TwoPhaseSketches tp = ldp_join_sketch_plus_build(
          w.a, w.b, params, cfg.rate, cfg.theta, w.domain, cfg.xi_disabled);
      res.build_ms = ms_since(t0);
      const auto t1 = std::chrono::steady_clock::now();
      res.estimate = ldp_join_sketch_plus_estimate(tp).value;
      res.query_ms = ms_since(t1);
      break;
    }
    case Method::Krr: {
      const KrrParams params = KrrParams::create(cfg.epsilon, w.domain);
      std::vector<std::uint64_t> ra(w.a.size()), rb(w.b.size());
      for (std::size_t i = 0; i < w.a.size(); ++i) {
        RandomSource rng(derive_seed(master_seed, kTagClient, 0, i));
        ra[i] = krr_perturb(w.a[i], params, rng);
      }
      for (std::size_t i = 0; i < w.b.size(); ++i) {
        RandomSource rng(derive_seed(master_seed, kTagClient, 1, i));
        rb[i] = krr_perturb(w.b[i], params, rng);
      }
      res.build_ms = ms_since(t0);
      const auto t1 = std::chrono::steady_clock::now();
      res.estimate = krr_join_estimate(ra, rb, params);
      res.query_ms = ms_since(t1);
      if (!freq_a.empty()) {
        std::unordered_map<std::uint64_t, std::uint64_t> counts;
        for (std::uint64_t d : ra) ++counts[d];
        res.mse = frequency_mse(freq_a, [&](std::uint64_t d) {
          const auto it = counts.find(d);
          const std::uint64_t c = it == counts.end() ? 0 : it->second;
          return krr_calibrate(c, ra.size(), params);
        });
      }
      break;
    }
    case Method::Multiway: {
      const SketchParams params = cfg.sketch_params(master_seed);
      const ChainSketches cs = build_chain_sketches(w.a, w.mid, w.t3, params, params);
      res.build_ms = ms_since(t0);
      const auto t1 = std::chrono::steady_clock::now();
      res.estimate = chain_join_est(cs.m1, cs.m2, cs.m3);
      res.query_ms = ms_since(t1);
      break;
    }
  }
  return res;
}

}  // namespace detail

// Per-client upload size in bits under the communication model of the
// report formats: sketch reports are fixed-size records independent of the
// domain; k-RR ships a domain-encoded report.
inline double bits_per_client(Method method, std::uint64_t domain) {
  switch (method) {
    case Method::Fagms: return 64.0;  // raw 64-bit value, non-private
    case Method::Ldpjs:
    case Method::LdpjsPlus: return 8.0 * kReportWireBytes;
    case Method::Multiway: return 8.0 * kReport2DWireBytes;
    case Method::Krr: return static_cast<double>(domain);
  }
  return 0.0;
}

inline MetricsRecord run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// CSV persistence. One row per (config, repetition-aggregate); all numeric
// fields printed with %.17g so identical (config, seed) pairs produce
// byte-identical rows.
// ---------------------------------------------------------------------------

inline std::string csv_header() {
  return "method,dataset_a,dataset_b,n,domain,k,m,epsilon,rate,theta,reps,"
         "seed,xi_disabled,true_join_size,est_mean,ae,re,mse,bits_per_client,"
         "estimates";
}

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string csv_row(const ExperimentConfig& cfg, const MetricsRecord& rec) {
  using detail::fmt_g17;
  std::string est_mean = "0";
  if (!rec.estimates.empty()) {
    double s = 0.0;
    for (double e : rec.estimates) s += e;
    est_mean = fmt_g17(s / static_cast<double>(rec.estimates.size()));
  }
  std::string ests;
  for (std::size_t i = 0; i < rec.estimates.size(); ++i) {
    if (i) ests += ';';
    ests += fmt_g17(rec.estimates[i]);
  }
  std::string row;
  row += method_name(cfg.method);
  row += ',';
  row += cfg.dataset.describe();
  row += ',';
  row += cfg.dataset_b ? cfg.dataset_b->describe() : "";
  row += ',' + std::to_string(rec.n_attribute_a);
  row += ',' + std::to_string(rec.domain_used);
  row += ',' + std::to_string(cfg.k);
  row += ',' + std::to_string(cfg.m);
  row += ',' + fmt_g17(cfg.epsilon);
  row += ',' + fmt_g17(cfg.rate);
  row += ',' + fmt_g17(cfg.theta);
  row += ',' + std::to_string(rec.completed_reps);
  row += ',' + std::to_string(cfg.seed);
  row += ',';
  row += cfg.xi_disabled ? "1" : "0";
  row += ',' + fmt_g17(rec.true_join);
  row += ',' + est_mean;
  row += ',' + fmt_g17(rec.ae);
  row += ',' + fmt_g17(rec.re);
  row += ',';
  row += rec.mse ? fmt_g17(*rec.mse) : "";
  row += ',' + fmt_g17(rec.bits_per_client);
  row += ',' + ests;
  return row;
}

inline void append_csv(const std::string& path, const ExperimentConfig& cfg,
                       const MetricsRecord& rec) {
  const bool fresh =
      !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot open CSV output: " + path);
  if (fresh) os << csv_header() << '\n';
  os << csv_row(cfg, rec) << '\n';
  if (!os) throw std::runtime_error("CSV write failed: " + path);
}

// Runs cfg.reps repetitions of the configured experiment on a fixed,
// seed-determined workload. Repetition i re-seeds the whole mechanism with
// derive_seed(cfg.seed, kTagRep, i). Repetitions run in parallel; results
// are committed in repetition order. If a repetition throws, the completed
// prefix is flushed to the CSV before the error propagates.
inline MetricsRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const detail::Workload w = detail::make_workload(cfg);

  MetricsRecord rec;
  rec.bits_per_client = bits_per_client(cfg.method, w.domain);
  rec.n_attribute_a = w.a.size();
  rec.domain_used = w.domain;
  if (cfg.method == Method::Multiway) {
    rec.true_join = static_cast<double>(true_chain_join(w.a, w.mid, w.t3));
  } else {
    rec.true_join = static_cast<double>(true_join_size(w.a, w.b));
  }

  std::vector<detail::RepResult> results(cfg.reps);
  std::vector<std::exception_ptr> errors(cfg.reps);
  const std::size_t n_workers = std::max<std::size_t>(
      1, std::min<std::size_t>(
             cfg.threads ? cfg.threads : std::thread::hardware_concurrency(),
             cfg.reps));
  auto worker = [&](std::size_t wid) {
    for (std::uint32_t i = static_cast<std::uint32_t>(wid); i < cfg.reps;
         i += static_cast<std::uint32_t>(n_workers)) {
      try {
        results[i] = detail::run_one_rep(cfg, w, derive_seed(cfg.seed, kTagRep, i));
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  };
  if (n_workers == 1) {
    worker(0);
  } else {
    std::vector<std::future<void>> futs;
    futs.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t)
      futs.push_back(std::async(std::launch::async, worker, t));
    for (auto& f : futs) f.get();
  }

  std::exception_ptr first_error;
  for (std::uint32_t i = 0; i < cfg.reps; ++i) {
    if (errors[i]) {
      first_error = errors[i];
      break;
    }
    const auto& r = results[i];
    rec.estimates.push_back(r.estimate);
    rec.ae += std::abs(rec.true_join - r.estimate);
    if (rec.true_join > 0)
      rec.re += std::abs(rec.true_join - r.estimate) / rec.true_join;
    rec.build_ms += r.build_ms;
    rec.query_ms += r.query_ms;
    if (r.mse) rec.mse = rec.mse.value_or(0.0) + *r.mse;
    ++rec.completed_reps;
  }
  if (rec.completed_reps > 0) {
    const double t = rec.completed_reps;
    rec.ae /= t;
    rec.re /= t;
    rec.build_ms /= t;
    rec.query_ms /= t;
    if (rec.mse) rec.mse = *rec.mse / t;
  }
  if (first_error) {
    if (!cfg.out.empty() && rec.completed_reps > 0) append_csv(cfg.out, cfg, rec);
    std::rethrow_exception(first_error);
  }
  if (!cfg.out.empty()) append_csv(cfg.out, cfg, rec);
  return rec;
}

}  // namespace ldpjs
