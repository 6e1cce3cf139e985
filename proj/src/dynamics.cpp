#include "acquire/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace acquire {
namespace {

double total_of(const Assignment& a) {
  return std::accumulate(a.per_user_loss.begin(), a.per_user_loss.end(), 0.0);
}

TrajectoryPoint point_of(const Population& pop, const ServiceSet& services,
                         const Assignment& a) {
  std::vector<double> group_total(pop.group_count(), 0.0);
  for (int i = 0; i < pop.size(); ++i)
    group_total[pop.user(i).group_id] += a.per_user_loss[i];
  double fair = 0.0;
  for (int g = 0; g < pop.group_count(); ++g)
    fair = std::max(fair, group_total[g] / pop.group_sizes()[g]);
  (void)services;
  return {total_of(a), fair};
}

Vec refit_cluster(const Population& pop, const std::vector<int>& members,
                  const std::vector<double>& weights, const RefitOptions& opts) {
  std::vector<RefitMember> refs;
  refs.reserve(members.size());
  for (int i : members) refs.push_back({&pop.user(i).loss, &pop.user(i).preference});
  return refit_center(refs, weights, opts);
}

}  // namespace

Assignment assign(const Population& pop, const ServiceSet& services, ExecPolicy policy) {
  if (services.size() < 1) throw std::invalid_argument("assign: empty service set");
  const int n = pop.size();
  Assignment a;
  a.choice.resize(n);
  a.per_user_loss.resize(n);
#pragma omp parallel for schedule(static) if (policy == ExecPolicy::Parallel && n > 64)
  for (int i = 0; i < n; ++i) {
    const auto [choice, loss] = user_choice(pop.user(i), services);
    a.choice[i] = choice;
    a.per_user_loss[i] = loss;
  }
  return a;
}

Trajectory generalized_kmeans(const Population& pop, const ServiceSet& init,
                              const KMeansOptions& opts) {
  if (init.size() < 1) throw std::invalid_argument("generalized_kmeans: empty initial services");
  const int k = init.size();

  Trajectory traj;
  ServiceSet services = init;
  Assignment current = assign(pop, services, opts.policy);
  traj.services.push_back(services);
  traj.points.push_back(point_of(pop, services, current));

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    std::vector<std::vector<int>> clusters(k);
    for (int i = 0; i < pop.size(); ++i) clusters[current.choice[i]].push_back(i);

    ServiceSet next = services;
    std::exception_ptr refit_error = nullptr;
#pragma omp parallel for schedule(dynamic) if (opts.policy == ExecPolicy::Parallel && k > 1)
    for (int j = 0; j < k; ++j) {
      if (clusters[j].empty()) continue;  // empty cluster keeps its parameters
      try {
        const std::vector<double> unit(clusters[j].size(), 1.0);
        next.thetas[j] = refit_cluster(pop, clusters[j], unit, opts.refit);
      } catch (...) {
#pragma omp critical
        if (!refit_error) refit_error = std::current_exception();
      }
    }
    if (refit_error) {
      try {
        std::rethrow_exception(refit_error);
      } catch (const std::exception& e) {
        throw std::runtime_error("generalized_kmeans: refit failed at iteration " +
                                 std::to_string(iter) + ": " + e.what());
      }
    }

    Assignment reassigned = assign(pop, next, opts.policy);
    const double prev = traj.points.back().total_loss;
    services = std::move(next);
    current = std::move(reassigned);
    traj.services.push_back(services);
    traj.points.push_back(point_of(pop, services, current));
    traj.iterations = iter;
    if (prev - traj.points.back().total_loss < opts.tol * std::max(1.0, prev)) {
      traj.converged = true;
      break;
    }
  }
  return traj;
}

Trajectory multiplicative_weights(const Population& pop, const ServiceSet& init,
                                  const MwOptions& opts) {
  if (init.size() < 1)
    throw std::invalid_argument("multiplicative_weights: empty initial services");
  if (opts.iters < 1) throw std::invalid_argument("multiplicative_weights: iters must be >= 1");
  if (opts.eta && !(*opts.eta > 0.0))
    throw std::invalid_argument("multiplicative_weights: eta must be positive");

  const int n = pop.size();
  const int k = init.size();

  Trajectory traj;
  ServiceSet services = init;
  Assignment current = assign(pop, services, opts.policy);
  traj.services.push_back(services);
  traj.points.push_back(point_of(pop, services, current));

  const double mean_initial = total_of(current) / n;
  const double eta = opts.eta.value_or(mean_initial > 0.0 ? 1.0 / mean_initial : 1.0);

  // Weights live in log domain; rows are normalized by their max before
  // exponentiating so the dominant entries never underflow.
  Mat logw = Mat::Zero(n, k);

  for (int iter = 1; iter <= opts.iters; ++iter) {
    Mat weights(n, k);
#pragma omp parallel for schedule(static) if (opts.policy == ExecPolicy::Parallel && n > 64)
    for (int i = 0; i < n; ++i) {
      const UserProfile& u = pop.user(i);
      if (opts.rule == WeightRule::Exponential) {
        for (int j = 0; j < k; ++j)
          logw(i, j) -= eta * eval_loss(u.loss, services.thetas[j], u.preference);
        const double row_max = logw.row(i).maxCoeff();
        for (int j = 0; j < k; ++j) logw(i, j) -= row_max;
        double row_sum = 0.0;
        for (int j = 0; j < k; ++j) row_sum += std::exp(logw(i, j));
        for (int j = 0; j < k; ++j) weights(i, j) = std::exp(logw(i, j)) / row_sum;
      } else {
        const auto [choice, loss] = user_choice(u, services);
        (void)loss;
        for (int j = 0; j < k; ++j) weights(i, j) = j == choice ? 1.0 : 0.0;
      }
    }

    ServiceSet next = services;
    std::vector<RefitMember> refs(n);
    for (int i = 0; i < n; ++i)
      refs[i] = {&pop.user(i).loss, &pop.user(i).preference};
    for (int j = 0; j < k; ++j) {
      std::vector<double> column(n);
      double column_mass = 0.0;
      for (int i = 0; i < n; ++i) {
        column[i] = weights(i, j);
        column_mass += column[i];
      }
      if (column_mass <= 0.0) continue;  // nobody weights this service
      next.thetas[j] = refit_center(refs, column, opts.refit);
    }

    services = std::move(next);
    current = assign(pop, services, opts.policy);
    traj.services.push_back(services);
    traj.points.push_back(point_of(pop, services, current));
    traj.iterations = iter;
  }
  traj.converged = true;
  return traj;
}

}  // namespace acquire
