#include "acquire/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "acquire/rng.hpp"

namespace acquire {
namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> per_group_totals(const Population& pop, const ServiceSet& services,
                                     ExecPolicy policy) {
  QueryLedger scratch;
  const FeedbackRound round = deploy(pop, services, scratch, policy);
  std::vector<double> totals(pop.group_count(), 0.0);
  for (int i = 0; i < pop.size(); ++i) totals[pop.user(i).group_id] += round.losses[i];
  return totals;
}

}  // namespace

double total_loss(const Population& pop, const ServiceSet& services, ExecPolicy policy) {
  QueryLedger scratch;
  const FeedbackRound round = deploy(pop, services, scratch, policy);
  return std::accumulate(round.losses.begin(), round.losses.end(), 0.0);
}

double fair_objective(const Population& pop, const ServiceSet& services, ExecPolicy policy) {
  const std::vector<double> totals = per_group_totals(pop, services, policy);
  double fair = 0.0;
  for (int g = 0; g < pop.group_count(); ++g)
    fair = std::max(fair, totals[g] / pop.group_sizes()[g]);
  return fair;
}

double weighted_loss(const Population& pop, const ServiceSet& services, ExecPolicy policy) {
  const std::vector<double> totals = per_group_totals(pop, services, policy);
  double sum = 0.0;
  for (int g = 0; g < pop.group_count(); ++g) sum += totals[g] / pop.group_sizes()[g];
  return sum;
}

std::vector<double> per_group_mean_loss(const Population& pop, const ServiceSet& services,
                                        ExecPolicy policy) {
  std::vector<double> totals = per_group_totals(pop, services, policy);
  for (int g = 0; g < pop.group_count(); ++g) totals[g] /= pop.group_sizes()[g];
  return totals;
}

LossModel LossSpec::instantiate(int dim) const {
  switch (family) {
    case LossFamily::SqMahalanobis:
      return LossModel::sq_mahalanobis(sigma_scale * Mat::Identity(dim, dim));
    case LossFamily::Huber:
      return LossModel::huber(delta);
    case LossFamily::Cosine:
      return LossModel::cosine();
    case LossFamily::MetricL2:
      return LossModel::metric_l2();
    case LossFamily::LipschitzSc:
      return LossModel::lipschitz_sc(lipschitz, mu);
  }
  throw std::logic_error("LossSpec: unknown family");
}

Population synthetic_mixture(const MixtureSpec& spec, std::uint64_t rng_seed) {
  if (spec.num_clusters < 1 || spec.users_per_cluster < 1 || spec.d < 1)
    throw std::invalid_argument("synthetic_mixture: sizes must be positive");
  if (spec.separation < 0.0)
    throw std::invalid_argument("synthetic_mixture: separation must be >= 0");
  if (spec.num_clusters > spec.d)
    throw std::invalid_argument("synthetic_mixture: simplex embedding needs clusters <= d");

  Rng rng(rng_seed);
  const int n = spec.num_clusters * spec.users_per_cluster;
  const LossModel model = spec.family.instantiate(spec.d);

  // Scaled standard-basis simplex: vertices (separation / sqrt(2)) e_c are
  // pairwise exactly `separation` apart.
  std::vector<Vec> centers(spec.num_clusters, Vec::Zero(spec.d));
  for (int c = 0; c < spec.num_clusters; ++c)
    centers[c](c) = spec.separation / std::numbers::sqrt2;

  std::vector<UserProfile> users;
  std::vector<std::string> labels;
  auto label_of = [&](int gid) { return "g" + std::to_string(gid); };

  int num_labels = 0;
  switch (spec.scheme) {
    case GroupScheme::ByCluster: num_labels = spec.num_clusters; break;
    case GroupScheme::Random: num_labels = spec.num_groups; break;
    case GroupScheme::Imbalanced: num_labels = 2; break;
  }
  if (num_labels < 1 || num_labels > n)
    throw std::invalid_argument("synthetic_mixture: bad group count");
  for (int g = 0; g < num_labels; ++g) labels.push_back(label_of(g));

  // Imbalanced: the small group keeps roughly a 1/(ratio+1) share, at least
  // one user each.
  int small_count = 0;
  if (spec.scheme == GroupScheme::Imbalanced) {
    small_count = std::max(1, static_cast<int>(std::floor(n / (spec.imbalance_ratio + 1.0))));
    if (small_count >= n) small_count = n - 1;
  }

  int uid = 0;
  for (int c = 0; c < spec.num_clusters; ++c) {
    for (int u = 0; u < spec.users_per_cluster; ++u, ++uid) {
      Vec phi = centers[c];
      for (int k = 0; k < spec.d; ++k) phi(k) += rng.gaussian();
      if (spec.family.family == LossFamily::Cosine) phi.normalize();
      int gid = 0;
      switch (spec.scheme) {
        case GroupScheme::ByCluster: gid = c; break;
        case GroupScheme::Random: gid = rng.uniform_int(num_labels); break;
        case GroupScheme::Imbalanced: gid = uid < n - small_count ? 0 : 1; break;
      }
      users.push_back({uid, std::move(phi), model, gid});
    }
  }

  // Group labels must all be represented; reassign stragglers round-robin.
  std::vector<int> counts(num_labels, 0);
  for (const UserProfile& u : users) ++counts[u.group_id];
  int cursor = 0;
  for (int g = 0; g < num_labels; ++g) {
    while (counts[g] == 0) {
      if (cursor >= n) throw std::logic_error("synthetic_mixture: cannot populate every group");
      if (counts[users[cursor].group_id] > 1) {
        --counts[users[cursor].group_id];
        users[cursor].group_id = g;
        ++counts[g];
      }
      ++cursor;
    }
  }

  return Population::from_users(std::move(users), std::move(labels));
}

MetricsReport run_experiment(const ExperimentConfig& config, const Population& pop,
                             ExecPolicy policy) {
  if (config.trials < 1) throw std::invalid_argument("run_experiment: trials must be >= 1");
  if (config.k < 1 || config.k > pop.size())
    throw std::invalid_argument("run_experiment: k must be in [1, n]");
  if (config.strategies.empty())
    throw std::invalid_argument("run_experiment: no strategies configured");

  MetricsReport report;
  report.k = config.k;
  report.trials = config.trials;
  report.base_seed = config.base_seed;

  for (const Strategy& strategy : config.strategies) {
    StrategyMetrics metrics;
    metrics.strategy = strategy;
    metrics.trials.resize(config.trials);

#pragma omp parallel for schedule(dynamic) if (policy == ExecPolicy::Parallel && config.trials > 1)
    for (int trial = 0; trial < config.trials; ++trial) {
      const std::uint64_t seed = config.base_seed ^ static_cast<std::uint64_t>(trial);
      // Inside a worker the per-user kernels run serially; parallelism lives
      // at the trial level.
      const SeedingResult run = baseline_seed(strategy, pop, config.k, seed, ExecPolicy::Serial);

      TrialRecord rec;
      rec.loss_evaluations = run.ledger.loss_observations;
      rec.preference_queries = static_cast<int>(run.ledger.preference_queries.size());
      rec.stopped_early = run.trace.stopped_early;

      ServiceSet services = run.services;
      if (config.dynamics.method == DynamicsSettings::Method::GeneralizedKMeans) {
        KMeansOptions opts;
        opts.tol = config.dynamics.tol;
        opts.max_iter = config.dynamics.max_iter;
        opts.policy = ExecPolicy::Serial;
        Trajectory traj = generalized_kmeans(pop, services, opts);
        rec.trajectory = traj.points;
        services = traj.services.back();
      } else if (config.dynamics.method == DynamicsSettings::Method::MultiplicativeWeights) {
        MwOptions opts;
        opts.eta = config.dynamics.eta;
        opts.iters = config.dynamics.mw_iters;
        opts.policy = ExecPolicy::Serial;
        Trajectory traj = multiplicative_weights(pop, services, opts);
        rec.trajectory = traj.points;
        services = traj.services.back();
      }

      rec.total_loss = total_loss(pop, services, ExecPolicy::Serial);
      rec.fair_objective = fair_objective(pop, services, ExecPolicy::Serial);
      rec.per_group_mean = per_group_mean_loss(pop, services, ExecPolicy::Serial);
      metrics.trials[trial] = std::move(rec);
    }

    metrics.per_group_mean.assign(pop.group_count(), 0.0);
    for (const TrialRecord& rec : metrics.trials) {
      metrics.mean_total_loss += rec.total_loss;
      metrics.mean_fair_objective += rec.fair_objective;
      metrics.loss_evaluations += rec.loss_evaluations;
      metrics.preference_queries += rec.preference_queries;
      for (int g = 0; g < pop.group_count(); ++g)
        metrics.per_group_mean[g] += rec.per_group_mean[g];
    }
    metrics.mean_total_loss /= config.trials;
    metrics.mean_fair_objective /= config.trials;
    for (double& v : metrics.per_group_mean) v /= config.trials;
    report.strategies.push_back(std::move(metrics));
  }
  return report;
}

void emit_report(const MetricsReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);

  json summary;
  summary["k"] = report.k;
  summary["trials"] = report.trials;
  summary["base_seed"] = report.base_seed;
  summary["strategies"] = json::array();
  bool any_trajectory = false;
  for (const StrategyMetrics& metrics : report.strategies) {
    json s;
    s["strategy"] = metrics.strategy.name();
    s["mean_total_loss"] = metrics.mean_total_loss;
    s["mean_fair_objective"] = metrics.mean_fair_objective;
    s["per_group_mean_loss"] = metrics.per_group_mean;
    s["loss_evaluations"] = metrics.loss_evaluations;
    s["preference_queries"] = metrics.preference_queries;
    json trials = json::array();
    for (const TrialRecord& rec : metrics.trials) {
      trials.push_back({{"total_loss", rec.total_loss},
                        {"fair_objective", rec.fair_objective},
                        {"loss_evaluations", rec.loss_evaluations},
                        {"preference_queries", rec.preference_queries},
                        {"stopped_early", rec.stopped_early}});
      any_trajectory = any_trajectory || !rec.trajectory.empty();
    }
    s["trials"] = std::move(trials);
    summary["strategies"].push_back(std::move(s));
  }
  {
    std::ofstream out(std::filesystem::path(dir) / "summary.json");
    if (!out) throw std::runtime_error("emit_report: cannot write summary.json");
    out << summary.dump(2) << "\n";
  }

  {
    std::ofstream out(std::filesystem::path(dir) / "metrics.csv");
    if (!out) throw std::runtime_error("emit_report: cannot write metrics.csv");
    out << "strategy,trial,k,total_loss,fair_objective,loss_evals,pref_queries\n";
    for (const StrategyMetrics& metrics : report.strategies) {
      for (std::size_t t = 0; t < metrics.trials.size(); ++t) {
        const TrialRecord& rec = metrics.trials[t];
        out << metrics.strategy.name() << "," << t << "," << report.k << ","
            << fmt17(rec.total_loss) << "," << fmt17(rec.fair_objective) << ","
            << rec.loss_evaluations << "," << rec.preference_queries << "\n";
      }
    }
  }

  if (any_trajectory) {
    std::ofstream out(std::filesystem::path(dir) / "trajectories.csv");
    if (!out) throw std::runtime_error("emit_report: cannot write trajectories.csv");
    out << "strategy,trial,iter,total_loss,fair_objective\n";
    for (const StrategyMetrics& metrics : report.strategies) {
      for (std::size_t t = 0; t < metrics.trials.size(); ++t) {
        const TrialRecord& rec = metrics.trials[t];
        for (std::size_t it = 0; it < rec.trajectory.size(); ++it) {
          out << metrics.strategy.name() << "," << t << "," << it << ","
              << fmt17(rec.trajectory[it].total_loss) << ","
              << fmt17(rec.trajectory[it].fair_objective) << "\n";
        }
      }
    }
  }
}

namespace {

MixtureSpec mixture_from_json(const json& j) {
  MixtureSpec spec;
  spec.num_clusters = j.value("clusters", spec.num_clusters);
  spec.users_per_cluster = j.value("per_cluster", spec.users_per_cluster);
  spec.d = j.value("d", spec.d);
  spec.separation = j.value("separation", spec.separation);
  if (j.contains("family")) {
    const std::string f = j.at("family").get<std::string>();
    if (f == "sq_euclidean" || f == "sq_mahalanobis")
      spec.family.family = LossFamily::SqMahalanobis;
    else if (f == "huber")
      spec.family.family = LossFamily::Huber;
    else if (f == "cosine")
      spec.family.family = LossFamily::Cosine;
    else if (f == "metric_l2")
      spec.family.family = LossFamily::MetricL2;
    else if (f == "lipschitz_sc")
      spec.family.family = LossFamily::LipschitzSc;
    else
      throw std::invalid_argument("config: unknown family '" + f + "'");
  }
  spec.family.delta = j.value("delta", spec.family.delta);
  spec.family.lipschitz = j.value("lipschitz", spec.family.lipschitz);
  spec.family.mu = j.value("mu", spec.family.mu);
  spec.family.sigma_scale = j.value("sigma_scale", spec.family.sigma_scale);
  if (j.contains("group_scheme")) {
    const std::string s = j.at("group_scheme").get<std::string>();
    if (s == "by_cluster")
      spec.scheme = GroupScheme::ByCluster;
    else if (s == "random")
      spec.scheme = GroupScheme::Random;
    else if (s == "imbalanced")
      spec.scheme = GroupScheme::Imbalanced;
    else
      throw std::invalid_argument("config: unknown group scheme '" + s + "'");
  }
  spec.num_groups = j.value("num_groups", spec.num_groups);
  spec.imbalance_ratio = j.value("imbalance_ratio", spec.imbalance_ratio);
  return spec;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: parse error in " + path + ": " + e.what());
  }

  ExperimentConfig config;
  const json instance = j.value("instance", json::object());
  if (instance.contains("path")) config.instance_path = instance.at("path").get<std::string>();
  if (instance.contains("generator"))
    config.generator = mixture_from_json(instance.at("generator"));
  if (!config.instance_path && !config.generator)
    throw std::invalid_argument("config: instance needs a path or a generator");

  config.k = j.value("k", config.k);
  config.trials = j.value("trials", config.trials);
  config.base_seed = j.value("seed", config.base_seed);
  config.out_dir = j.value("out", config.out_dir);
  for (const auto& name : j.value("strategies", std::vector<std::string>{}))
    config.strategies.push_back(Strategy::parse(name));
  if (config.strategies.empty())
    throw std::invalid_argument("config: at least one strategy required");

  if (j.contains("dynamics")) {
    const json d = j.at("dynamics");
    const std::string method = d.value("method", std::string("none"));
    if (method == "none")
      config.dynamics.method = DynamicsSettings::Method::None;
    else if (method == "kmeans")
      config.dynamics.method = DynamicsSettings::Method::GeneralizedKMeans;
    else if (method == "mw")
      config.dynamics.method = DynamicsSettings::Method::MultiplicativeWeights;
    else
      throw std::invalid_argument("config: unknown dynamics method '" + method + "'");
    if (d.contains("eta")) config.dynamics.eta = d.at("eta").get<double>();
    config.dynamics.tol = d.value("tol", config.dynamics.tol);
    config.dynamics.max_iter = d.value("max_iter", config.dynamics.max_iter);
    config.dynamics.mw_iters = d.value("iters", config.dynamics.mw_iters);
  }
  return config;
}

Population resolve_instance(const ExperimentConfig& config) {
  if (config.instance_path) return load_population(*config.instance_path);
  if (config.generator) return synthetic_mixture(*config.generator, config.base_seed);
  throw std::invalid_argument("config: no instance source");
}

}  // namespace acquire
