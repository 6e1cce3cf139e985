#pragma once

#include <span>
#include <vector>

#include "acquire/feedback.hpp"

namespace acquire {

/// Globally optimal clustering of a small instance: a partition of the users
/// into at most k blocks, the refit center of each block, and the total loss
/// of users against their own block's center.
struct OptimalClustering {
  std::vector<std::vector<int>> clusters;  // blocks ordered by smallest member
  std::vector<Vec> centers;
  double total_loss = 0.0;
};

struct BruteForceOptions {
  int max_users = 14;  // enumeration guard
  int max_k = 4;
  RefitOptions refit;
  ExecPolicy policy = ExecPolicy::Parallel;
};

/// Enumerates every partition of [n] into at most k nonempty blocks
/// (restricted-growth strings), refits each block, and returns the partition
/// minimizing the total loss. Ties go to the lexicographically smallest
/// restricted-growth string.
OptimalClustering brute_force_opt(const Population& pop, int k,
                                  const BruteForceOptions& opts = {});

/// Same enumeration minimizing the group-weighted total loss G (each user's
/// loss divided by its group size); blocks are refit with those weights.
OptimalClustering brute_force_weighted_opt(const Population& pop, int k,
                                           const BruteForceOptions& opts = {});

struct FairOracle {
  ServiceSet services;
  double fair_value = 0.0;  // fair objective of the returned services
};

/// Enumerates partitions, refits each block with unit weights, and keeps the
/// center set minimizing the fair objective (users choosing freely). Exact
/// only for families with exact refits.
FairOracle brute_force_fair_opt(const Population& pop, int k,
                                const BruteForceOptions& opts = {});

/// The instance constant of the main approximation bound:
///   max over clusters B of [4 / min_j sum_i c_ij] * [max_j sum_i 1/c_ij].
double k_opt_constant(const Population& pop, const OptimalClustering& clustering, const Mat& c);

/// Group-weighted variant: sums carry 1/|group(i)| inside both factors.
double k_fair_constant(const Population& pop, const OptimalClustering& clustering, const Mat& c);

/// K * (2 + ln k) * opt_loss.
double approximation_bound(double k_constant, int k, double opt_loss);

struct LemmaCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool vacuous = false;  // all in-cluster losses already zero
};

/// Exact expectation (uniform over j in B) of the cluster loss when a service
/// is centered on user j, against 2 * max_j (1/|B|) sum_i 1/c_ij times the
/// cluster's optimal single-center loss.
LemmaCheck lemma_b1_check(const Population& pop, std::span<const int> cluster, const Mat& c,
                          const RefitOptions& refit = {});

/// Exact conditional expectation of the cluster loss after adding a center
/// sampled proportionally to current loss within the cluster, against
/// [4 / min_j sum_i c_ij] * [max_j sum_i 1/c_ij] times the optimal loss.
LemmaCheck lemma_b2_check(const Population& pop, std::span<const int> cluster,
                          const ServiceSet& preexisting, const Mat& c,
                          const RefitOptions& refit = {});

}  // namespace acquire
