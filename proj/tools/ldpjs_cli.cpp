// Command-line harness: dataset generation, experiment execution, parameter
// sweeps, an exact privacy verifier, and micro-benchmarks. CSV output is the
// plotting boundary; timings go to stdout only so CSV bytes stay a pure
// function of (config, seed).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldpjs/harness.hpp"

namespace {

using namespace ldpjs;

struct DatasetFlags {
  std::string kind = "zipf";
  double alpha = 1.5;
  double mu = 0.0;
  double sigma = 1.0;
  std::string path;
  std::string path_mid;
  std::string path_b;

  DatasetSpec to_spec() const {
    DatasetSpec spec;
    if (kind == "zipf") {
      spec.kind = DatasetSpec::Kind::Zipf;
      spec.alpha = alpha;
    } else if (kind == "gaussian") {
      spec.kind = DatasetSpec::Kind::Gaussian;
      spec.mu = mu;
      spec.sigma = sigma;
    } else if (kind == "file") {
      spec.kind = DatasetSpec::Kind::File;
      spec.path = path;
      spec.path_mid = path_mid;
      spec.path_b = path_b;
    } else {
      throw CLI::ValidationError("--dataset must be zipf, gaussian or file");
    }
    return spec;
  }
};

void add_dataset_flags(CLI::App* cmd, DatasetFlags& flags) {
  cmd->add_option("--dataset", flags.kind, "zipf | gaussian | file")
      ->capture_default_str();
  cmd->add_option("--alpha", flags.alpha, "zipf skewness")->capture_default_str();
  cmd->add_option("--mu", flags.mu, "gaussian mean")->capture_default_str();
  cmd->add_option("--sigma", flags.sigma, "gaussian stddev")->capture_default_str();
  cmd->add_option("--path", flags.path, "values file (T1 for multiway)");
  cmd->add_option("--path-mid", flags.path_mid, "pairs file (multiway middle table)");
  cmd->add_option("--path-b", flags.path_b, "values file for attribute B / T3");
}

void print_record(const ExperimentConfig& cfg, const MetricsRecord& rec) {
  double mean = 0;
  for (double e : rec.estimates) mean += e;
  if (!rec.estimates.empty()) mean /= static_cast<double>(rec.estimates.size());
  std::cout << "method=" << method_name(cfg.method)
            << " reps=" << rec.completed_reps
            << " true_join=" << detail::fmt_g17(rec.true_join)
            << " est_mean=" << detail::fmt_g17(mean) << "\n  AE=" << rec.ae
            << " RE=" << rec.re;
  if (rec.mse) std::cout << " MSE=" << *rec.mse;
  std::cout << " bits_per_client=" << rec.bits_per_client
            << "\n  build=" << rec.build_ms << "ms/rep query=" << rec.query_ms
            << "ms/rep\n";
}

int run_sweep(ExperimentConfig cfg, const std::string& param,
              const std::vector<double>& values) {
  for (double v : values) {
    if (param == "epsilon") {
      cfg.epsilon = v;
    } else if (param == "m") {
      cfg.m = static_cast<std::uint32_t>(v);
    } else if (param == "k") {
      cfg.k = static_cast<std::uint32_t>(v);
    } else if (param == "rate") {
      cfg.rate = v;
    } else if (param == "theta") {
      cfg.theta = v;
    } else if (param == "alpha") {
      cfg.dataset.alpha = v;
    } else if (param == "n") {
      cfg.n = static_cast<std::size_t>(v);
    } else {
      std::cerr << "unknown sweep parameter: " << param << "\n";
      return 1;
    }
    std::cout << "--- " << param << " = " << v << " ---\n";
    print_record(cfg, run_experiment(cfg));
  }
  return 0;
}

int run_verify(std::uint32_t k, std::uint32_t m, double epsilon,
               std::uint64_t domain) {
  const SketchParams params{k, m, epsilon, 12345};
  const HashFamily fam = derive_family(params);
  const double bound = std::exp(epsilon);
  FrequentItemSet fi;
  fi.items = {domain / 3, (2 * domain) / 3};
  std::sort(fi.items.begin(), fi.items.end());
  fi.freq_a.assign(fi.items.size(), 0.0);
  fi.freq_b.assign(fi.items.size(), 0.0);

  double worst_client = 0.0, worst_fap = 0.0;
  for (std::uint64_t d1 = 0; d1 < domain; ++d1)
    for (std::uint64_t d2 = 0; d2 < domain; ++d2)
      for (int y : {-1, 1})
        for (std::uint32_t j = 0; j < k; ++j)
          for (std::uint32_t l = 0; l < m; ++l) {
            worst_client = std::max(
                worst_client,
                client_report_weight(d1, y, j, l, params, fam) /
                    client_report_weight(d2, y, j, l, params, fam));
            for (FapMode mode : {FapMode::Low, FapMode::High})
              worst_fap = std::max(
                  worst_fap,
                  fap_report_weight(d1, mode, fi, y, j, l, params, fam) /
                      fap_report_weight(d2, mode, fi, y, j, l, params, fam));
          }

  const SketchParams p2{1, m, epsilon, 77};
  const SketchParams p3{1, m, epsilon, 78};
  const HashFamily f2 = derive_family(p2), f3 = derive_family(p3);
  double worst_2d = 0.0;
  const std::uint64_t tuple_domain = std::min<std::uint64_t>(domain, 16);
  for (std::uint64_t a1 = 0; a1 < tuple_domain; ++a1)
    for (std::uint64_t b1 = 0; b1 < tuple_domain; ++b1)
      for (std::uint64_t a2 = 0; a2 < tuple_domain; ++a2)
        for (std::uint64_t b2 = 0; b2 < tuple_domain; ++b2)
          for (int y : {-1, 1})
            for (std::uint32_t l1 = 0; l1 < m; ++l1)
              for (std::uint32_t l2 = 0; l2 < m; ++l2)
                worst_2d = std::max(
                    worst_2d,
                    report_weight_2d(a1, b1, y, 0, l1, l2, p2, p3, f2, f3) /
                        report_weight_2d(a2, b2, y, 0, l1, l2, p2, p3, f2, f3));

  std::cout << "e^epsilon           = " << detail::fmt_g17(bound) << "\n";
  std::cout << "max ratio client    = " << detail::fmt_g17(worst_client) << "\n";
  std::cout << "max ratio fap       = " << detail::fmt_g17(worst_fap) << "\n";
  std::cout << "max ratio 2-dim     = " << detail::fmt_g17(worst_2d) << "\n";
  const bool ok =
      worst_client <= bound && worst_fap <= bound && worst_2d <= bound;
  std::cout << (ok ? "PASS" : "FAIL")
            << ": every output-law ratio is within e^epsilon\n";
  return ok ? 0 : 1;
}

int run_bench(std::size_t n, std::uint64_t domain, std::uint32_t k,
              std::uint32_t m, double epsilon) {
  using clock = std::chrono::steady_clock;
  const SketchParams params{k, m, epsilon, 99};
  const HashFamily fam = derive_family(params);
  const auto values = gen_zipf(n, domain, 1.2, 4);

  auto t0 = clock::now();
  PrivateSketch sk(params, fam);
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource rng(derive_seed(params.master_seed, kTagClient, 0, i));
    sk.add(client_perturb(values[i], params, fam, rng));
  }
  const double perturb_ms =
      std::chrono::duration<double, std::milli>(clock::now() - t0).count();

  t0 = clock::now();
  sk.restore();
  const double restore_ms =
      std::chrono::duration<double, std::milli>(clock::now() - t0).count();

  std::stringstream snapshot;
  sk.save(snapshot);
  const PrivateSketch other = PrivateSketch::load(snapshot);
  t0 = clock::now();
  volatile double est = sketch_join(sk, other);
  const double join_ms =
      std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  (void)est;

  std::cout << "clients             : " << n << "\n";
  std::cout << "perturb+accumulate  : " << perturb_ms << " ms ("
            << 1e6 * perturb_ms / static_cast<double>(n) << " ns/client)\n";
  std::cout << "restore             : " << restore_ms << " ms\n";
  std::cout << "join estimate       : " << join_ms << " ms\n";
  std::cout << "snapshot bytes      : " << snapshot.str().size() << "\n";
  std::cout << "bits/client ldpjs   : " << bits_per_client(Method::Ldpjs, domain)
            << " (constant in domain)\n";
  std::cout << "bits/client krr     : " << bits_per_client(Method::Krr, domain)
            << " (domain encoding)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketch-based join size estimation under local differential privacy"};
  app.require_subcommand(1);

  // --- generate ------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset file");
  DatasetFlags gen_flags;
  std::size_t gen_n = 100000;
  std::uint64_t gen_domain = 10000, gen_seed = 0;
  std::string gen_out = "dataset.txt";
  bool gen_pairs = false;
  add_dataset_flags(gen, gen_flags);
  gen->add_option("--n", gen_n, "number of values")->capture_default_str();
  gen->add_option("--domain", gen_domain, "id domain size")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output path")->capture_default_str();
  gen->add_flag("--pairs", gen_pairs, "write two-column tuples for middle tables");

  // --- run / sweep ---------------------------------------------------------
  ExperimentConfig cfg;
  std::string method_flag = "ldpjs";
  DatasetFlags run_flags, run_flags_b;
  std::string sweep_param;
  std::vector<double> sweep_values;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--method", method_flag,
                    "fagms | ldpjs | ldpjs_plus | krr | multiway")
        ->capture_default_str();
    add_dataset_flags(cmd, run_flags);
    cmd->add_option("--dataset-b", run_flags_b.kind,
                    "attribute B dataset kind (defaults to --dataset)");
    cmd->add_option("--alpha-b", run_flags_b.alpha, "attribute B zipf skewness");
    cmd->add_option("--mu-b", run_flags_b.mu, "attribute B gaussian mean");
    cmd->add_option("--sigma-b", run_flags_b.sigma, "attribute B gaussian stddev");
    cmd->add_option("--n", cfg.n, "values per attribute")->capture_default_str();
    cmd->add_option("--domain", cfg.domain, "id domain (0 = derive from files)")
        ->capture_default_str();
    cmd->add_option("--k", cfg.k, "sketch rows")->capture_default_str();
    cmd->add_option("--m", cfg.m, "sketch columns (power of two)")
        ->capture_default_str();
    cmd->add_option("--epsilon", cfg.epsilon, "privacy budget")
        ->capture_default_str();
    cmd->add_option("--rate", cfg.rate, "phase-1 sample rate")
        ->capture_default_str();
    cmd->add_option("--theta", cfg.theta, "frequent-item threshold fraction")
        ->capture_default_str();
    cmd->add_option("--reps", cfg.reps, "repetitions")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "run seed")->capture_default_str();
    cmd->add_option("--out", cfg.out, "CSV output path (append)");
    cmd->add_flag("--xi-disabled", cfg.xi_disabled,
                  "drop the sign hash (count-mean-sketch mode)");
    cmd->add_flag("--mse", cfg.compute_mse,
                  "also report frequency-estimation MSE (ldpjs, krr)");
    cmd->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
  };

  auto* runc = app.add_subcommand("run", "run one experiment configuration");
  add_run_flags(runc);

  auto* sweep = app.add_subcommand("sweep", "run a one-parameter sweep");
  add_run_flags(sweep);
  sweep->add_option("--sweep", sweep_param,
                    "parameter: epsilon | m | k | rate | theta | alpha | n")
      ->required();
  sweep->add_option("--values", sweep_values, "sweep values")
      ->required()
      ->delimiter(',');

  // --- verify-ldp ----------------------------------------------------------
  auto* verify = app.add_subcommand(
      "verify-ldp", "exact enumeration of the client output laws");
  std::uint32_t v_k = 2, v_m = 4;
  double v_eps = 1.0;
  std::uint64_t v_domain = 64;
  verify->add_option("--k", v_k, "sketch rows")->capture_default_str();
  verify->add_option("--m", v_m, "sketch columns")->capture_default_str();
  verify->add_option("--epsilon", v_eps, "privacy budget")->capture_default_str();
  verify->add_option("--domain", v_domain, "input values to enumerate")
      ->capture_default_str();

  // --- bench ---------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "micro-benchmarks and payload sizes");
  std::size_t b_n = 1000000;
  std::uint64_t b_domain = 100000;
  std::uint32_t b_k = 18, b_m = 1024;
  double b_eps = 4.0;
  bench->add_option("--n", b_n, "clients")->capture_default_str();
  bench->add_option("--domain", b_domain, "value domain")->capture_default_str();
  bench->add_option("--k", b_k, "sketch rows")->capture_default_str();
  bench->add_option("--m", b_m, "sketch columns")->capture_default_str();
  bench->add_option("--epsilon", b_eps, "privacy budget")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const DatasetSpec spec = gen_flags.to_spec();
      std::ofstream out(gen_out);
      if (!out) throw std::runtime_error("cannot open output: " + gen_out);
      if (gen_pairs) {
        const auto a =
            detail::generate(spec, gen_n, gen_domain, derive_seed(gen_seed, 1));
        const auto b =
            detail::generate(spec, gen_n, gen_domain, derive_seed(gen_seed, 2));
        for (std::size_t i = 0; i < gen_n; ++i)
          out << a[i] << ',' << b[i] << '\n';
      } else {
        for (std::uint64_t v :
             detail::generate(spec, gen_n, gen_domain, derive_seed(gen_seed, 0)))
          out << v << '\n';
      }
      std::cout << "wrote " << gen_n << (gen_pairs ? " tuples to " : " values to ")
                << gen_out << "\n";
      return 0;
    }

    if (runc->parsed() || sweep->parsed()) {
      CLI::App* active = runc->parsed() ? runc : sweep;
      cfg.method = parse_method(method_flag);
      cfg.dataset = run_flags.to_spec();
      if (active->count("--dataset-b") || active->count("--alpha-b") ||
          active->count("--mu-b") || active->count("--sigma-b")) {
        if (!active->count("--dataset-b")) run_flags_b.kind = run_flags.kind;
        run_flags_b.path = run_flags.path_b;
        cfg.dataset_b = run_flags_b.to_spec();
      }
      if (sweep->parsed()) return run_sweep(cfg, sweep_param, sweep_values);
      print_record(cfg, run_experiment(cfg));
      return 0;
    }

    if (verify->parsed()) return run_verify(v_k, v_m, v_eps, v_domain);
    if (bench->parsed()) return run_bench(b_n, b_domain, b_k, b_m, b_eps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
