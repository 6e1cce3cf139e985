#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acquire/dynamics.hpp"
#include "acquire/seeding.hpp"

namespace acquire {

/// sum_i min_j L_i(theta_j, phi_i).
double total_loss(const Population& pop, const ServiceSet& services,
                  ExecPolicy policy = ExecPolicy::Parallel);

/// max over groups of the group's average loss.
double fair_objective(const Population& pop, const ServiceSet& services,
                      ExecPolicy policy = ExecPolicy::Parallel);

/// sum over groups of the group's average loss. Sandwiched between the fair
/// objective and m times it.
double weighted_loss(const Population& pop, const ServiceSet& services,
                     ExecPolicy policy = ExecPolicy::Parallel);

std::vector<double> per_group_mean_loss(const Population& pop, const ServiceSet& services,
                                        ExecPolicy policy = ExecPolicy::Parallel);

enum class GroupScheme { ByCluster, Random, Imbalanced };

struct LossSpec {
  LossFamily family = LossFamily::SqMahalanobis;
  double delta = 1.0;        // Huber
  double lipschitz = 2.0;    // LipschitzSc
  double mu = 1.0;           // LipschitzSc
  double sigma_scale = 1.0;  // SqMahalanobis: sigma = sigma_scale * I

  LossModel instantiate(int dim) const;
};

/// Planted-mixture generator: cluster centers sit at separation-scaled
/// simplex vertices (pairwise distance = separation, needs clusters <= d)
/// and preferences are center + unit Gaussian noise.
struct MixtureSpec {
  int num_clusters = 2;
  int users_per_cluster = 5;
  int d = 2;
  double separation = 10.0;
  LossSpec family;
  GroupScheme scheme = GroupScheme::ByCluster;
  int num_groups = 2;            // Random scheme
  double imbalance_ratio = 10.0; // Imbalanced scheme: large/small group size
};

Population synthetic_mixture(const MixtureSpec& spec, std::uint64_t rng_seed);

struct DynamicsSettings {
  enum class Method { None, GeneralizedKMeans, MultiplicativeWeights };
  Method method = Method::None;
  std::optional<double> eta;
  double tol = 1e-9;
  int max_iter = 500;
  int mw_iters = 100;
};

struct ExperimentConfig {
  std::optional<std::string> instance_path;
  std::optional<MixtureSpec> generator;
  int k = 2;
  std::vector<Strategy> strategies;
  int trials = 500;
  std::uint64_t base_seed = 0;
  DynamicsSettings dynamics;
  std::string out_dir = ".";
  bool emit_trace = false;

  static ExperimentConfig from_json_file(const std::string& path);
};

struct TrialRecord {
  double total_loss = 0.0;
  double fair_objective = 0.0;
  std::vector<double> per_group_mean;
  std::int64_t loss_evaluations = 0;
  int preference_queries = 0;
  bool stopped_early = false;
  std::vector<TrajectoryPoint> trajectory;  // empty when dynamics disabled
};

struct StrategyMetrics {
  Strategy strategy;
  double mean_total_loss = 0.0;
  double mean_fair_objective = 0.0;
  std::vector<double> per_group_mean;
  std::int64_t loss_evaluations = 0;  // summed over trials
  std::int64_t preference_queries = 0;
  std::vector<TrialRecord> trials;
};

struct MetricsReport {
  int k = 0;
  int trials = 0;
  std::uint64_t base_seed = 0;
  std::vector<StrategyMetrics> strategies;
};

/// Runs `trials` seeded passes per strategy (trial seed = base_seed XOR
/// trial index) and aggregates metrics; deterministic for a fixed config.
MetricsReport run_experiment(const ExperimentConfig& config, const Population& pop,
                             ExecPolicy policy = ExecPolicy::Parallel);

/// Writes summary.json and metrics.csv (plus trajectories.csv when any trial
/// recorded one) into dir. Floats carry 17 significant digits, so identical
/// reports produce byte-identical files.
void emit_report(const MetricsReport& report, const std::string& dir);

Population resolve_instance(const ExperimentConfig& config);

}  // namespace acquire
