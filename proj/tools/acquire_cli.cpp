// Command-line harness around the library: synthetic instance generation,
// single seeding runs, full benchmark experiments, the brute-force oracle,
// assumption sweeps, and the linear-regression concentration table.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acquire/harness.hpp"
#include "acquire/linreg.hpp"
#include "acquire/oracle.hpp"
#include "acquire/rng.hpp"

namespace {

using namespace acquire;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

json services_to_json(const ServiceSet& services) {
  json out = json::array();
  for (int j = 0; j < services.size(); ++j) {
    const Vec& theta = services.thetas[j];
    out.push_back({{"theta", std::vector<double>(theta.data(), theta.data() + theta.size())},
                   {"origin", services.origins[j]}});
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

int run_gen(const MixtureSpec& spec, std::uint64_t seed, const std::string& out_path) {
  const Population pop = synthetic_mixture(spec, seed);
  save_population_jsonl(pop, out_path);
  std::cout << "wrote " << pop.size() << " users (" << pop.group_count() << " groups, d="
            << pop.dim() << ") to " << out_path << "\n";
  return kExitOk;
}

int run_seed(const std::string& in_path, const std::string& strategy_name, int k,
             std::uint64_t seed, const std::string& out_dir, bool emit_trace) {
  const Population pop = load_population(in_path);
  const Strategy strategy = Strategy::parse(strategy_name);
  const SeedingResult result = baseline_seed(strategy, pop, k, seed);

  std::filesystem::create_directories(out_dir);
  json services;
  services["strategy"] = strategy.name();
  services["k"] = k;
  services["seed"] = seed;
  services["stopped_early"] = result.trace.stopped_early;
  services["total_loss"] = total_loss(pop, result.services);
  services["fair_objective"] = fair_objective(pop, result.services);
  services["preference_queries"] = result.ledger.preference_queries;
  services["loss_observations"] = result.ledger.loss_observations;
  services["services"] = services_to_json(result.services);
  write_file(std::filesystem::path(out_dir) / "services.json", services.dump(2) + "\n");
  if (emit_trace)
    write_file(std::filesystem::path(out_dir) / "trace.json",
               trace_to_json(result.trace, result.services) + "\n");

  std::cout << "total_loss=" << services["total_loss"].get<double>()
            << " fair_objective=" << services["fair_objective"].get<double>()
            << " queries=" << result.ledger.preference_queries.size() << "\n";
  return kExitOk;
}

struct BenchOverrides {
  std::optional<int> trials, k;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int run_bench(const std::string& config_path, const BenchOverrides& overrides) {
  ExperimentConfig config = ExperimentConfig::from_json_file(config_path);
  if (overrides.trials) config.trials = *overrides.trials;
  if (overrides.k) config.k = *overrides.k;
  if (overrides.seed) config.base_seed = *overrides.seed;
  if (overrides.out) config.out_dir = *overrides.out;
  const Population pop = resolve_instance(config);
  const MetricsReport report = run_experiment(config, pop);
  emit_report(report, config.out_dir);
  for (const StrategyMetrics& m : report.strategies)
    std::cout << m.strategy.name() << ": mean_total_loss=" << m.mean_total_loss
              << " mean_fair_objective=" << m.mean_fair_objective << "\n";
  std::cout << "report written to " << config.out_dir << "\n";
  return kExitOk;
}

int run_oracle(const std::string& in_path, int k, bool fair) {
  const Population pop = load_population(in_path);
  const Mat c = alignment_matrix(pop);

  const OptimalClustering opt = brute_force_opt(pop, k);
  const double k_opt = k_opt_constant(pop, opt, c);
  json out;
  out["k"] = k;
  out["opt_total_loss"] = opt.total_loss;
  out["k_opt"] = k_opt;
  out["bound"] = approximation_bound(k_opt, k, opt.total_loss);
  out["clusters"] = opt.clusters;
  if (fair) {
    const OptimalClustering scaled = brute_force_weighted_opt(pop, k);
    const FairOracle fair_opt = brute_force_fair_opt(pop, k);
    const double k_fair = k_fair_constant(pop, scaled, c);
    out["k_fair"] = k_fair;
    out["fair_opt_value"] = fair_opt.fair_value;
    out["fair_bound"] = pop.group_count() *
                        approximation_bound(k_fair, k, fair_opt.fair_value);
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int run_check_assumptions(const std::string& family, double c_override, int samples, int pairs,
                          std::uint64_t seed) {
  int total_violations = 0;
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    Rng rng(Rng::derive(seed, p));
    const int d = 2 + static_cast<int>(rng.next_u64() % 3);
    Vec phi_i(d), phi_j(d);
    for (int i = 0; i < d; ++i) {
      phi_i(i) = rng.gaussian();
      phi_j(i) = rng.gaussian();
    }

    LossModel mi = LossModel::metric_l2(), mj = LossModel::metric_l2();
    if (family == "huber") {
      const double delta = 0.5 + rng.uniform();
      mi = LossModel::huber(delta);
      mj = LossModel::huber(delta);
    } else if (family == "cosine") {
      mi = LossModel::cosine();
      mj = LossModel::cosine();
      phi_i.normalize();
      phi_j.normalize();
    } else if (family == "metric_l2") {
      // defaults already set
    } else if (family == "sq_mahalanobis") {
      auto random_spd = [&](int dim) {
        Mat a(dim, dim);
        for (int r = 0; r < dim; ++r)
          for (int cc = 0; cc < dim; ++cc) a(r, cc) = rng.gaussian();
        return Mat(a * a.transpose() + 0.2 * Mat::Identity(dim, dim));
      };
      mi = LossModel::sq_mahalanobis(random_spd(d));
      mj = LossModel::sq_mahalanobis(random_spd(d));
    } else if (family == "lipschitz_sc") {
      auto model = [&]() {
        const double mu = 0.5 + rng.uniform();
        return LossModel::lipschitz_sc((2.0 + rng.uniform()) * mu, mu);
      };
      mi = model();
      mj = model();
    } else {
      throw std::invalid_argument("unknown family '" + family + "'");
    }

    const double c = c_override > 0.0 ? c_override : alignment_constant(mi, mj);
    const AssumptionReport report =
        check_assumptions(mi, phi_i, mj, phi_j, c, samples, Rng::derive(seed, 1000 + p));
    total_violations += static_cast<int>(report.violations.size());
    worst = std::max(worst, report.max_violation);
  }
  std::cout << "family=" << family << " pairs=" << pairs << " samples_per_pair=" << samples
            << " violations=" << total_violations << " max_violation=" << worst << "\n";
  return kExitOk;
}

int run_linreg_sweep(const std::string& out_path, const std::vector<int>& n_grid, int trials,
                     std::uint64_t seed) {
  std::vector<SweepConfig> configs;
  Rng rng(seed);
  for (int cfg = 0; cfg < 5; ++cfg) {
    const int d = 2 + cfg % 3;
    Mat a(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) a(r, c) = rng.gaussian();
    Vec phi(d);
    for (int i = 0; i < d; ++i) phi(i) = rng.gaussian();
    configs.push_back({Mat(a * a.transpose() + 0.5 * Mat::Identity(d, d)), phi,
                       cfg % 2 == 0 ? FeatureDist::gaussian() : FeatureDist::rademacher(0.25)});
  }
  // Theta grids are per-config offsets of phi (dimensions differ by config).
  std::vector<SweepRow> all_rows;
  for (std::size_t cfg = 0; cfg < configs.size(); ++cfg) {
    std::vector<Vec> grid;
    for (int t = 0; t < 4; ++t) {
      Vec theta = configs[cfg].phi;
      theta(t % theta.size()) += 1.0 + t;
      grid.push_back(theta);
    }
    const std::vector<SweepConfig> one{configs[cfg]};
    std::vector<SweepRow> rows =
        concentration_sweep(one, grid, n_grid, trials, Rng::derive(seed, 77 + cfg));
    for (SweepRow& row : rows) {
      row.config = static_cast<int>(cfg);
      all_rows.push_back(row);
    }
  }
  sweep_to_csv(all_rows, out_path);
  std::cout << "wrote " << all_rows.size() << " rows to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive service initialization under bandit feedback"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic mixture instance (JSONL)");
  MixtureSpec spec;
  std::string gen_out = "population.jsonl";
  std::string gen_family = "sq_euclidean";
  std::string gen_scheme = "by_cluster";
  std::uint64_t gen_seed = 0;
  gen->add_option("--clusters", spec.num_clusters, "planted clusters");
  gen->add_option("--per-cluster", spec.users_per_cluster, "users per cluster");
  gen->add_option("--d", spec.d, "dimension");
  gen->add_option("--separation", spec.separation, "center separation");
  gen->add_option("--family", gen_family,
                  "sq_euclidean|sq_mahalanobis|huber|cosine|metric_l2|lipschitz_sc");
  gen->add_option("--delta", spec.family.delta, "huber width");
  gen->add_option("--group-scheme", gen_scheme, "by_cluster|random|imbalanced");
  gen->add_option("--num-groups", spec.num_groups, "groups for the random scheme");
  gen->add_option("--imbalance-ratio", spec.imbalance_ratio, "large/small group ratio");
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output JSONL path");

  // seed
  auto* seed_cmd = app.add_subcommand("seed", "run one seeding strategy on an instance");
  std::string seed_in, seed_strategy = "acquire", seed_out = "seed_out";
  int seed_k = 2;
  std::uint64_t seed_seed = 0;
  bool emit_trace = false;
  seed_cmd->add_option("--in", seed_in, "population JSONL/CSV")->required();
  seed_cmd->add_option("--strategy", seed_strategy, "strategy name");
  seed_cmd->add_option("--k", seed_k, "number of services");
  seed_cmd->add_option("--seed", seed_seed, "rng seed");
  seed_cmd->add_option("--out", seed_out, "output directory");
  seed_cmd->add_flag("--emit-trace", emit_trace, "also write trace.json");

  // bench
  auto* bench = app.add_subcommand("bench", "run a full experiment from a JSON config");
  std::string bench_config;
  BenchOverrides overrides;
  int bench_trials = 0, bench_k = 0;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  bench->add_option("--config", bench_config, "experiment config (JSON)")->required();
  auto* opt_trials = bench->add_option("--trials", bench_trials, "override trial count");
  auto* opt_k = bench->add_option("--k", bench_k, "override service count");
  auto* opt_seed = bench->add_option("--seed", bench_seed, "override base seed");
  auto* opt_out = bench->add_option("--out", bench_out, "override output directory");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force optimum and bound constants");
  std::string oracle_in;
  int oracle_k = 2;
  bool oracle_fair = false;
  oracle_cmd->add_option("--in", oracle_in, "population JSONL/CSV")->required();
  oracle_cmd->add_option("--k", oracle_k, "number of services");
  oracle_cmd->add_flag("--fair", oracle_fair, "also compute the fair constants");

  // check-assumptions
  auto* check = app.add_subcommand("check-assumptions", "triangle-inequality sweep");
  std::string check_family = "huber";
  double check_c = -1.0;
  int check_samples = 10000, check_pairs = 100;
  std::uint64_t check_seed = 0;
  check->add_option("--family", check_family, "loss family");
  check->add_option("--c", check_c, "override constant (default: paper value)");
  check->add_option("--samples", check_samples, "thetas per pair");
  check->add_option("--pairs", check_pairs, "model pairs");
  check->add_option("--seed", check_seed, "rng seed");

  // linreg-sweep
  auto* sweep = app.add_subcommand("linreg-sweep", "empirical-loss concentration table");
  std::string sweep_out = "sweep.csv";
  std::vector<int> sweep_n = {256, 1024, 4096};
  int sweep_trials = 50;
  std::uint64_t sweep_seed = 0;
  sweep->add_option("--out", sweep_out, "output CSV");
  sweep->add_option("--n-grid", sweep_n, "sample sizes");
  sweep->add_option("--trials", sweep_trials, "trials per cell");
  sweep->add_option("--seed", sweep_seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (gen->parsed()) {
      if (gen_family == "sq_euclidean" || gen_family == "sq_mahalanobis")
        spec.family.family = LossFamily::SqMahalanobis;
      else if (gen_family == "huber")
        spec.family.family = LossFamily::Huber;
      else if (gen_family == "cosine")
        spec.family.family = LossFamily::Cosine;
      else if (gen_family == "metric_l2")
        spec.family.family = LossFamily::MetricL2;
      else if (gen_family == "lipschitz_sc")
        spec.family.family = LossFamily::LipschitzSc;
      else
        throw std::invalid_argument("unknown family '" + gen_family + "'");
      if (gen_scheme == "by_cluster")
        spec.scheme = GroupScheme::ByCluster;
      else if (gen_scheme == "random")
        spec.scheme = GroupScheme::Random;
      else if (gen_scheme == "imbalanced")
        spec.scheme = GroupScheme::Imbalanced;
      else
        throw std::invalid_argument("unknown group scheme '" + gen_scheme + "'");
      return run_gen(spec, gen_seed, gen_out);
    }
    if (seed_cmd->parsed())
      return run_seed(seed_in, seed_strategy, seed_k, seed_seed, seed_out, emit_trace);
    if (bench->parsed()) {
      if (opt_trials->count()) overrides.trials = bench_trials;
      if (opt_k->count()) overrides.k = bench_k;
      if (opt_seed->count()) overrides.seed = bench_seed;
      if (opt_out->count()) overrides.out = bench_out;
      return run_bench(bench_config, overrides);
    }
    if (oracle_cmd->parsed()) return run_oracle(oracle_in, oracle_k, oracle_fair);
    if (check->parsed())
      return run_check_assumptions(check_family, check_c, check_samples, check_pairs, check_seed);
    if (sweep->parsed()) return run_linreg_sweep(sweep_out, sweep_n, sweep_trials, sweep_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
