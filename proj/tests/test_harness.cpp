#include "acquire/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "acquire/oracle.hpp"
#include "acquire/rng.hpp"
#include "test_util.hpp"

using namespace acquire;
using namespace acquire::testing;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(TotalLoss, HandValues) {
  const Population pop = sq_euclidean_population({vec2(0, 0), vec2(2, 0)});
  ServiceSet all;
  for (const UserProfile& u : pop.users()) all.add(u.preference);
  EXPECT_DOUBLE_EQ(total_loss(pop, all), 0.0);

  ServiceSet one;
  one.add(vec2(0, 0));
  EXPECT_DOUBLE_EQ(total_loss(pop, one), 4.0);

  ServiceSet superset = one;
  superset.add(vec2(5, 5));
  EXPECT_LE(total_loss(pop, superset), total_loss(pop, one));
}

TEST(FairObjective, MaxOfGroupAverages) {
  // group 0 losses (1, 3), group 1 losses (2): averages 2 and 2
  const Population pop =
      sq_euclidean_population({vec1(1), vec1(std::sqrt(3.0)), vec1(std::sqrt(2.0))}, {0, 0, 1});
  ServiceSet origin;
  origin.add(vec1(0));
  EXPECT_NEAR(fair_objective(pop, origin), 2.0, 1e-12);

  ServiceSet all;
  for (const UserProfile& u : pop.users()) all.add(u.preference);
  EXPECT_DOUBLE_EQ(fair_objective(pop, all), 0.0);
}

TEST(FairObjective, SingleGroupIsMeanLoss) {
  const Population pop = sq_euclidean_population({vec1(0), vec1(2), vec1(4)});
  ServiceSet one;
  one.add(vec1(0));
  EXPECT_DOUBLE_EQ(fair_objective(pop, one), total_loss(pop, one) / pop.size());
}

TEST(WeightedLoss, SumOfGroupAverages) {
  const Population pop =
      sq_euclidean_population({vec1(1), vec1(std::sqrt(3.0)), vec1(std::sqrt(2.0))}, {0, 0, 1});
  ServiceSet origin;
  origin.add(vec1(0));
  EXPECT_NEAR(weighted_loss(pop, origin), 4.0, 1e-12);
}

TEST(WeightedLoss, SingleGroupEqualsFairObjective) {
  const Population pop = sq_euclidean_population({vec1(0), vec1(3)});
  ServiceSet one;
  one.add(vec1(1));
  EXPECT_DOUBLE_EQ(weighted_loss(pop, one), fair_objective(pop, one));
}

TEST(WeightedLoss, SandwichOnRandomInstances) {
  Rng rng(60);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 4 + rep % 6;
    std::vector<Vec> points;
    std::vector<int> groups;
    const int m = 1 + rep % 3;
    for (int i = 0; i < n; ++i) {
      points.push_back(random_vec(2, rng, 4.0));
      groups.push_back(i % m);
    }
    const Population pop = sq_euclidean_population(points, groups);
    ServiceSet services;
    services.add(random_vec(2, rng, 4.0));
    services.add(random_vec(2, rng, 4.0));
    const double phi = fair_objective(pop, services);
    const double g = weighted_loss(pop, services);
    ASSERT_LE(phi, g + 1e-12);
    ASSERT_LE(g, pop.group_count() * phi + 1e-12);
  }
}

TEST(SyntheticMixture, ZeroSeparationSingleBlob) {
  MixtureSpec spec;
  spec.num_clusters = 2;
  spec.users_per_cluster = 10;
  spec.d = 2;
  spec.separation = 0.0;
  const Population pop = synthetic_mixture(spec, 5);
  EXPECT_EQ(pop.size(), 20);
  double norm_sum = 0.0;
  for (const UserProfile& u : pop.users()) norm_sum += u.preference.norm();
  EXPECT_LT(norm_sum / pop.size(), 3.0);  // unit Gaussian around the origin
}

TEST(SyntheticMixture, PlantedPartitionRecoveredAtHighSeparation) {
  MixtureSpec spec;
  spec.num_clusters = 2;
  spec.users_per_cluster = 4;
  spec.d = 2;
  spec.separation = 50.0;
  const Population pop = synthetic_mixture(spec, 9);
  const OptimalClustering opt = brute_force_opt(pop, 2);
  ASSERT_EQ(opt.clusters.size(), 2u);
  EXPECT_EQ(opt.clusters[0], (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(opt.clusters[1], (std::vector<int>{4, 5, 6, 7}));
}

TEST(SyntheticMixture, FixedSeedReproducesInstance) {
  MixtureSpec spec;
  spec.num_clusters = 2;
  spec.users_per_cluster = 5;
  spec.d = 3;
  spec.separation = 8.0;
  spec.scheme = GroupScheme::Imbalanced;
  const Population a = synthetic_mixture(spec, 123);
  const Population b = synthetic_mixture(spec, 123);
  ASSERT_EQ(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.user(i).preference, b.user(i).preference);
    EXPECT_EQ(a.user(i).group_id, b.user(i).group_id);
  }
}

TEST(SyntheticMixture, FixedSeedSerializesByteIdentically) {
  MixtureSpec spec;
  spec.separation = 7.0;
  spec.scheme = GroupScheme::Imbalanced;
  const auto path_a = std::filesystem::temp_directory_path() / "acquire_gen_a.jsonl";
  const auto path_b = std::filesystem::temp_directory_path() / "acquire_gen_b.jsonl";
  save_population_jsonl(synthetic_mixture(spec, 321), path_a.string());
  save_population_jsonl(synthetic_mixture(spec, 321), path_b.string());
  EXPECT_EQ(slurp(path_a), slurp(path_b));
  EXPECT_FALSE(slurp(path_a).empty());
}

TEST(SyntheticMixture, ImbalancedRatioShape) {
  MixtureSpec spec;
  spec.num_clusters = 2;
  spec.users_per_cluster = 11;
  spec.d = 2;
  spec.scheme = GroupScheme::Imbalanced;
  spec.imbalance_ratio = 10.0;
  const Population pop = synthetic_mixture(spec, 4);
  ASSERT_EQ(pop.group_count(), 2);
  EXPECT_EQ(pop.group_sizes()[0], 20);
  EXPECT_EQ(pop.group_sizes()[1], 2);
}

TEST(SyntheticMixture, RejectsBadSpecs) {
  MixtureSpec spec;
  spec.num_clusters = 3;
  spec.d = 2;  // simplex embedding needs clusters <= d
  EXPECT_THROW(synthetic_mixture(spec, 1), std::invalid_argument);
  spec.num_clusters = 0;
  EXPECT_THROW(synthetic_mixture(spec, 1), std::invalid_argument);
}

TEST(RunExperiment, DeterministicReports) {
  MixtureSpec spec;
  spec.separation = 10.0;
  const Population pop = synthetic_mixture(spec, 77);
  ExperimentConfig config;
  config.k = 2;
  config.trials = 16;
  config.base_seed = 5;
  config.strategies = {Strategy::parse("random")};
  const MetricsReport a = run_experiment(config, pop);
  const MetricsReport b = run_experiment(config, pop);
  EXPECT_EQ(a.strategies[0].mean_total_loss, b.strategies[0].mean_total_loss);
  EXPECT_EQ(a.strategies[0].mean_fair_objective, b.strategies[0].mean_fair_objective);
  for (int t = 0; t < config.trials; ++t)
    EXPECT_EQ(a.strategies[0].trials[t].total_loss, b.strategies[0].trials[t].total_loss);
}

TEST(RunExperiment, AcquireBeatsRandomOnSeparatedMixture) {
  MixtureSpec spec;
  spec.num_clusters = 2;
  spec.users_per_cluster = 10;
  spec.d = 2;
  spec.separation = 20.0;
  const Population pop = synthetic_mixture(spec, 31);
  ExperimentConfig config;
  config.k = 2;
  config.trials = 500;
  config.base_seed = 8;
  config.strategies = {Strategy::parse("acquire"), Strategy::parse("random")};
  const MetricsReport report = run_experiment(config, pop);
  EXPECT_LT(report.strategies[0].mean_total_loss, report.strategies[1].mean_total_loss);
}

TEST(RunExperiment, AccountingInvariant) {
  MixtureSpec spec;
  spec.separation = 6.0;
  const Population pop = synthetic_mixture(spec, 3);
  ExperimentConfig config;
  config.k = 3;
  config.trials = 20;
  config.base_seed = 2;
  config.strategies = {Strategy::parse("acquire"), Strategy::parse("greedy"),
                       Strategy::parse("fair_acquire")};
  const MetricsReport report = run_experiment(config, pop);
  for (const StrategyMetrics& metrics : report.strategies) {
    for (const TrialRecord& rec : metrics.trials) {
      // a run that stops early deploys once per placed service; a full run
      // deploys k-1 times
      const int rounds = rec.stopped_early ? rec.preference_queries : config.k - 1;
      EXPECT_EQ(rec.loss_evaluations, static_cast<std::int64_t>(pop.size()) * rounds);
      EXPECT_LE(rec.preference_queries, config.k);
    }
  }
}

TEST(RunExperiment, TrajectoriesNonIncreasingWithDynamics) {
  MixtureSpec spec;
  spec.separation = 10.0;
  const Population pop = synthetic_mixture(spec, 41);
  for (const auto method : {DynamicsSettings::Method::GeneralizedKMeans,
                            DynamicsSettings::Method::MultiplicativeWeights}) {
    ExperimentConfig config;
    config.k = 2;
    config.trials = 10;
    config.base_seed = 6;
    config.strategies = {Strategy::parse("acquire")};
    config.dynamics.method = method;
    config.dynamics.mw_iters = 30;
    const MetricsReport report = run_experiment(config, pop);
    for (const TrialRecord& rec : report.strategies[0].trials) {
      ASSERT_FALSE(rec.trajectory.empty());
      for (std::size_t i = 1; i < rec.trajectory.size(); ++i)
        ASSERT_LE(rec.trajectory[i].total_loss,
                  rec.trajectory[i - 1].total_loss +
                      1e-9 * std::max(1.0, rec.trajectory[i - 1].total_loss));
    }
  }
}

TEST(EmitReport, FilesAndByteStability) {
  MixtureSpec spec;
  spec.separation = 10.0;
  const Population pop = synthetic_mixture(spec, 12);
  ExperimentConfig config;
  config.k = 2;
  config.trials = 6;
  config.base_seed = 4;
  config.strategies = {Strategy::parse("acquire"), Strategy::parse("random")};
  const MetricsReport report = run_experiment(config, pop);

  const auto dir = std::filesystem::temp_directory_path() / "acquire_report_test";
  std::filesystem::remove_all(dir);
  emit_report(report, dir.string());
  ASSERT_TRUE(std::filesystem::exists(dir / "summary.json"));
  ASSERT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "trajectories.csv"));  // dynamics off

  // strategy x trial rows plus the header
  std::ifstream csv(dir / "metrics.csv");
  int lines = 0;
  std::string line;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1 + 2 * config.trials);

  const std::string summary_once = slurp(dir / "summary.json");
  const std::string metrics_once = slurp(dir / "metrics.csv");
  emit_report(report, dir.string());
  EXPECT_EQ(slurp(dir / "summary.json"), summary_once);
  EXPECT_EQ(slurp(dir / "metrics.csv"), metrics_once);
}

TEST(ExperimentConfig, JsonParsing) {
  const auto path = std::filesystem::temp_directory_path() / "acquire_config.json";
  {
    std::ofstream out(path);
    out << R"({
      "instance": {"generator": {"clusters": 2, "per_cluster": 5, "d": 2,
                   "separation": 10.0, "group_scheme": "imbalanced"}},
      "k": 2, "trials": 7, "seed": 99,
      "strategies": ["acquire", "balanced_greedy"],
      "dynamics": {"method": "kmeans", "tol": 1e-8, "max_iter": 100},
      "out": "somewhere"
    })";
  }
  const ExperimentConfig config = ExperimentConfig::from_json_file(path.string());
  EXPECT_EQ(config.k, 2);
  EXPECT_EQ(config.trials, 7);
  EXPECT_EQ(config.base_seed, 99u);
  ASSERT_EQ(config.strategies.size(), 2u);
  EXPECT_EQ(config.strategies[1].kind, StrategyKind::BalancedGreedy);
  EXPECT_EQ(config.dynamics.method, DynamicsSettings::Method::GeneralizedKMeans);
  EXPECT_EQ(config.out_dir, "somewhere");

  const Population pop = resolve_instance(config);
  EXPECT_EQ(pop.size(), 10);
  EXPECT_EQ(pop.group_count(), 2);
}

TEST(ExperimentConfig, RejectsInvalid) {
  const auto path = std::filesystem::temp_directory_path() / "acquire_bad_config.json";
  {
    std::ofstream out(path);
    out << R"({"k": 2, "trials": 1, "strategies": ["acquire"]})";
  }
  EXPECT_THROW(ExperimentConfig::from_json_file(path.string()), std::invalid_argument);
  {
    std::ofstream out(path);
    out << R"({"instance": {"path": "x.jsonl"}, "strategies": ["nope"]})";
  }
  EXPECT_THROW(ExperimentConfig::from_json_file(path.string()), std::invalid_argument);
}
