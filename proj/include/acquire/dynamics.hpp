#pragma once

#include <optional>
#include <vector>

#include "acquire/feedback.hpp"

namespace acquire {

/// Hard assignment of every user to its loss-minimizing service (ties toward
/// the lowest service index).
struct Assignment {
  std::vector<int> choice;
  std::vector<double> per_user_loss;
};

Assignment assign(const Population& pop, const ServiceSet& services,
                  ExecPolicy policy = ExecPolicy::Parallel);

struct TrajectoryPoint {
  double total_loss;
  double fair_objective;
};

/// One dynamics run: services and the hard-assignment objective at the
/// initial state and after each iteration.
struct Trajectory {
  std::vector<ServiceSet> services;  // services[0] is the initial set
  std::vector<TrajectoryPoint> points;
  int iterations = 0;
  bool converged = false;
};

struct KMeansOptions {
  double tol = 1e-9;  // relative total-loss improvement below which we stop
  int max_iter = 500;
  RefitOptions refit;
  ExecPolicy policy = ExecPolicy::Parallel;
};

/// Alternating minimization: reassign users, then refit each nonempty
/// cluster's service; a service chosen by nobody keeps its parameters.
/// The recorded total loss is non-increasing.
Trajectory generalized_kmeans(const Population& pop, const ServiceSet& init,
                              const KMeansOptions& opts = {});

enum class WeightRule {
  Exponential,  // w_ij *= exp(-eta L_i(theta_j)), rows renormalized
  HardMax,      // rows one-hot at the current argmin (the eta -> inf limit)
};

struct MwOptions {
  std::optional<double> eta;  // default: 1 / (mean initial loss)
  int iters = 100;
  WeightRule rule = WeightRule::Exponential;
  RefitOptions refit;
  ExecPolicy policy = ExecPolicy::Parallel;
};

/// Multiplicative-weights dynamics over an n x k weight matrix held in log
/// domain: per iteration the weights absorb exp(-eta * loss) and each service
/// is refit with its weight column. Reports the hard-assignment loss.
Trajectory multiplicative_weights(const Population& pop, const ServiceSet& init,
                                  const MwOptions& opts = {});

}  // namespace acquire
