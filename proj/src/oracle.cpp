#include "acquire/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace acquire {
namespace {

enum class ScoreMode { Total, WeightedG, Fair };

// Gathers the refit members once; score() is called per enumerated partition
// and reuses scratch storage. Each worker thread owns a copy.
class PartitionScorer {
 public:
  PartitionScorer(const Population& pop, ScoreMode mode, const RefitOptions& refit)
      : pop_(&pop), mode_(mode), refit_(refit) {
    const int n = pop.size();
    members_.reserve(n);
    for (int i = 0; i < n; ++i)
      members_.push_back({&pop.user(i).loss, &pop.user(i).preference});
    refit_weights_.assign(n, 1.0);
    score_weights_.assign(n, 1.0);
    if (mode == ScoreMode::WeightedG) {
      const std::vector<double> inv = pop.inverse_group_weights();
      refit_weights_ = inv;
      score_weights_ = inv;
    }
    // Weighted means suffice when every user shares one covariance.
    const Mat& sigma0 = pop.user(0).loss.sigma();
    common_sigma_ = pop.user(0).loss.family() == LossFamily::SqMahalanobis;
    for (const UserProfile& u : pop.users()) {
      if (!common_sigma_) break;
      common_sigma_ = u.loss.family() == LossFamily::SqMahalanobis &&
                      u.loss.sigma().rows() == sigma0.rows() &&
                      (u.loss.sigma().array() == sigma0.array()).all();
    }
  }

  int block_count(const std::vector<int>& rgs) const {
    return *std::max_element(rgs.begin(), rgs.end()) + 1;
  }

  double score(const std::vector<int>& rgs, std::vector<Vec>* centers_out = nullptr) {
    const int n = static_cast<int>(rgs.size());
    const int nblocks = block_count(rgs);
    blocks_.assign(nblocks, {});
    for (int i = 0; i < n; ++i) blocks_[rgs[i]].push_back(i);

    centers_.clear();
    for (const std::vector<int>& block : blocks_) centers_.push_back(refit_block(block));
    if (centers_out) *centers_out = centers_;

    if (mode_ == ScoreMode::Fair) return fair_value(centers_);

    double total = 0.0;
    for (int b = 0; b < nblocks; ++b)
      for (int i : blocks_[b])
        total += score_weights_[i] * eval_loss(pop_->user(i).loss, centers_[b],
                                               pop_->user(i).preference);
    return total;
  }

  const std::vector<std::vector<int>>& blocks() const { return blocks_; }
  const std::vector<Vec>& centers() const { return centers_; }

  double fair_value(const std::vector<Vec>& centers) const {
    std::vector<double> group_total(pop_->group_count(), 0.0);
    for (int i = 0; i < pop_->size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& c : centers)
        best = std::min(best, eval_loss(pop_->user(i).loss, c, pop_->user(i).preference));
      group_total[pop_->user(i).group_id] += best;
    }
    double fair = 0.0;
    for (int g = 0; g < pop_->group_count(); ++g)
      fair = std::max(fair, group_total[g] / pop_->group_sizes()[g]);
    return fair;
  }

 private:
  Vec refit_block(const std::vector<int>& block) {
    if (block.size() == 1) return pop_->user(block[0]).preference;
    if (common_sigma_) {
      Vec mean = Vec::Zero(pop_->dim());
      double mass = 0.0;
      for (int i : block) {
        mean += refit_weights_[i] * pop_->user(i).preference;
        mass += refit_weights_[i];
      }
      return mean / mass;
    }
    scratch_members_.clear();
    scratch_weights_.clear();
    for (int i : block) {
      scratch_members_.push_back(members_[i]);
      scratch_weights_.push_back(refit_weights_[i]);
    }
    return refit_center(scratch_members_, scratch_weights_, refit_);
  }

  const Population* pop_;
  ScoreMode mode_;
  RefitOptions refit_;
  std::vector<RefitMember> members_;
  std::vector<double> refit_weights_;
  std::vector<double> score_weights_;
  bool common_sigma_ = false;
  std::vector<std::vector<int>> blocks_;
  std::vector<Vec> centers_;
  std::vector<RefitMember> scratch_members_;
  std::vector<double> scratch_weights_;
};

struct Candidate {
  double score = std::numeric_limits<double>::infinity();
  std::vector<int> rgs;
  bool valid = false;

  // Enumeration visits restricted-growth strings in lexicographic order, so
  // keeping the first strict improvement realizes the lex tie-break.
  void offer(double s, const std::vector<int>& r) {
    if (!valid || s < score) {
      score = s;
      rgs = r;
      valid = true;
    }
  }
};

void enumerate_suffix(std::vector<int>& rgs, int pos, int current_max, int n, int max_k,
                      PartitionScorer& scorer, Candidate& best) {
  if (pos == n) {
    best.offer(scorer.score(rgs), rgs);
    return;
  }
  const int limit = std::min(current_max + 1, max_k - 1);
  for (int a = 0; a <= limit; ++a) {
    rgs[pos] = a;
    enumerate_suffix(rgs, pos + 1, std::max(current_max, a), n, max_k, scorer, best);
  }
}

void enumerate_prefixes(std::vector<int>& rgs, int pos, int current_max, int prefix_len,
                        int max_k, std::vector<std::pair<std::vector<int>, int>>& prefixes) {
  if (pos == prefix_len) {
    prefixes.emplace_back(std::vector<int>(rgs.begin(), rgs.begin() + prefix_len), current_max);
    return;
  }
  const int limit = std::min(current_max + 1, max_k - 1);
  for (int a = 0; a <= limit; ++a) {
    rgs[pos] = a;
    enumerate_prefixes(rgs, pos + 1, std::max(current_max, a), prefix_len, max_k, prefixes);
  }
}

Candidate best_partition(const Population& pop, int k, ScoreMode mode,
                         const BruteForceOptions& opts) {
  const int n = pop.size();
  if (k < 1 || k > n) throw std::invalid_argument("brute_force: k must be in [1, n]");
  if (n > opts.max_users || k > opts.max_k)
    throw std::invalid_argument("brute_force: instance exceeds the enumeration guard (n <= " +
                                std::to_string(opts.max_users) + ", k <= " +
                                std::to_string(opts.max_k) + ")");

  PartitionScorer scorer(pop, mode, opts.refit);

  if (opts.policy == ExecPolicy::Serial || n <= 6) {
    Candidate best;
    std::vector<int> rgs(n, 0);
    enumerate_suffix(rgs, 1, 0, n, k, scorer, best);
    return best;
  }

  // Parallel over restricted-growth-string prefixes; suffixes expand serially
  // per prefix and results merge in prefix (lexicographic) order.
  const int prefix_len = std::min(n, 6);
  std::vector<std::pair<std::vector<int>, int>> prefixes;
  {
    std::vector<int> rgs(n, 0);
    enumerate_prefixes(rgs, 1, 0, prefix_len, k, prefixes);
  }
  std::vector<Candidate> local(prefixes.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t p = 0; p < prefixes.size(); ++p) {
    PartitionScorer thread_scorer = scorer;
    std::vector<int> rgs(n, 0);
    std::copy(prefixes[p].first.begin(), prefixes[p].first.end(), rgs.begin());
    enumerate_suffix(rgs, prefix_len, prefixes[p].second, n, k, thread_scorer, local[p]);
  }
  Candidate best;
  for (const Candidate& c : local)
    if (c.valid) best.offer(c.score, c.rgs);
  return best;
}

OptimalClustering clustering_from(const Population& pop, const Candidate& best, ScoreMode mode,
                                  const BruteForceOptions& opts) {
  PartitionScorer scorer(pop, mode, opts.refit);
  OptimalClustering result;
  std::vector<Vec> centers;
  result.total_loss = scorer.score(best.rgs, &centers);
  result.clusters = scorer.blocks();
  result.centers = std::move(centers);
  return result;
}

double optimal_cluster_loss(const Population& pop, std::span<const int> cluster,
                            const RefitOptions& refit) {
  std::vector<RefitMember> members;
  for (int i : cluster) members.push_back({&pop.user(i).loss, &pop.user(i).preference});
  const std::vector<double> unit(cluster.size(), 1.0);
  const Vec center = refit_center(members, unit, refit);
  double loss = 0.0;
  for (int i : cluster) loss += eval_loss(pop.user(i).loss, center, pop.user(i).preference);
  return loss;
}

void require_cluster(const Population& pop, std::span<const int> cluster) {
  if (cluster.empty()) throw std::invalid_argument("oracle: empty cluster");
  for (int i : cluster)
    if (i < 0 || i >= pop.size()) throw std::invalid_argument("oracle: bad user index");
}

}  // namespace

OptimalClustering brute_force_opt(const Population& pop, int k, const BruteForceOptions& opts) {
  const Candidate best = best_partition(pop, k, ScoreMode::Total, opts);
  return clustering_from(pop, best, ScoreMode::Total, opts);
}

OptimalClustering brute_force_weighted_opt(const Population& pop, int k,
                                           const BruteForceOptions& opts) {
  const Candidate best = best_partition(pop, k, ScoreMode::WeightedG, opts);
  return clustering_from(pop, best, ScoreMode::WeightedG, opts);
}

FairOracle brute_force_fair_opt(const Population& pop, int k, const BruteForceOptions& opts) {
  const Candidate best = best_partition(pop, k, ScoreMode::Fair, opts);
  PartitionScorer scorer(pop, ScoreMode::Fair, opts.refit);
  std::vector<Vec> centers;
  FairOracle oracle;
  oracle.fair_value = scorer.score(best.rgs, &centers);
  for (std::size_t j = 0; j < centers.size(); ++j) oracle.services.add(centers[j], -1);
  return oracle;
}

double k_opt_constant(const Population& pop, const OptimalClustering& clustering, const Mat& c) {
  if (c.rows() != pop.size() || c.cols() != pop.size())
    throw std::invalid_argument("k_opt_constant: alignment matrix shape mismatch");
  double k_constant = 0.0;
  for (const std::vector<int>& block : clustering.clusters) {
    require_cluster(pop, block);
    double min_sum = std::numeric_limits<double>::infinity();
    double max_inv = 0.0;
    for (int j : block) {
      double sum_c = 0.0, sum_inv = 0.0;
      for (int i : block) {
        sum_c += c(i, j);
        sum_inv += 1.0 / c(i, j);
      }
      min_sum = std::min(min_sum, sum_c);
      max_inv = std::max(max_inv, sum_inv);
    }
    k_constant = std::max(k_constant, 4.0 / min_sum * max_inv);
  }
  return k_constant;
}

double k_fair_constant(const Population& pop, const OptimalClustering& clustering, const Mat& c) {
  if (c.rows() != pop.size() || c.cols() != pop.size())
    throw std::invalid_argument("k_fair_constant: alignment matrix shape mismatch");
  const std::vector<double> inv = pop.inverse_group_weights();
  double k_constant = 0.0;
  for (const std::vector<int>& block : clustering.clusters) {
    require_cluster(pop, block);
    double min_sum = std::numeric_limits<double>::infinity();
    double max_inv = 0.0;
    for (int j : block) {
      double sum_c = 0.0, sum_inv = 0.0;
      for (int i : block) {
        sum_c += c(i, j) * inv[i];
        sum_inv += inv[i] / c(i, j);
      }
      min_sum = std::min(min_sum, sum_c);
      max_inv = std::max(max_inv, sum_inv);
    }
    k_constant = std::max(k_constant, 4.0 / min_sum * max_inv);
  }
  return k_constant;
}

double approximation_bound(double k_constant, int k, double opt_loss) {
  if (!(k_constant > 0.0)) throw std::invalid_argument("approximation_bound: K must be positive");
  if (k < 1) throw std::invalid_argument("approximation_bound: k must be >= 1");
  if (opt_loss < 0.0) throw std::invalid_argument("approximation_bound: opt_loss must be >= 0");
  return k_constant * (2.0 + std::log(static_cast<double>(k))) * opt_loss;
}

LemmaCheck lemma_b1_check(const Population& pop, std::span<const int> cluster, const Mat& c,
                          const RefitOptions& refit) {
  require_cluster(pop, cluster);
  const double size = static_cast<double>(cluster.size());

  double lhs = 0.0;
  for (int j : cluster)
    for (int i : cluster)
      lhs += eval_loss(pop.user(i).loss, pop.user(j).preference, pop.user(i).preference);
  lhs /= size;

  double max_inv = 0.0;
  for (int j : cluster) {
    double sum_inv = 0.0;
    for (int i : cluster) sum_inv += 1.0 / c(i, j);
    max_inv = std::max(max_inv, sum_inv);
  }
  const double rhs = 2.0 / size * max_inv * optimal_cluster_loss(pop, cluster, refit);

  LemmaCheck check{lhs, rhs, lhs <= rhs + 1e-9, false};
  return check;
}

LemmaCheck lemma_b2_check(const Population& pop, std::span<const int> cluster,
                          const ServiceSet& preexisting, const Mat& c,
                          const RefitOptions& refit) {
  require_cluster(pop, cluster);
  if (preexisting.size() < 1)
    throw std::invalid_argument("lemma_b2_check: preexisting services required");

  std::vector<double> current;
  double mass = 0.0;
  for (int i : cluster) {
    const double loss = user_choice(pop.user(i), preexisting).second;
    current.push_back(loss);
    mass += loss;
  }
  if (mass <= 0.0) return {0.0, 0.0, true, true};  // sampling law undefined; bound vacuous

  double lhs = 0.0;
  for (std::size_t jj = 0; jj < cluster.size(); ++jj) {
    const int j = cluster[jj];
    double after = 0.0;
    for (std::size_t ii = 0; ii < cluster.size(); ++ii) {
      const int i = cluster[ii];
      const double to_new =
          eval_loss(pop.user(i).loss, pop.user(j).preference, pop.user(i).preference);
      after += std::min(current[ii], to_new);
    }
    lhs += current[jj] / mass * after;
  }

  double min_sum = std::numeric_limits<double>::infinity();
  double max_inv = 0.0;
  for (int j : cluster) {
    double sum_c = 0.0, sum_inv = 0.0;
    for (int i : cluster) {
      sum_c += c(i, j);
      sum_inv += 1.0 / c(i, j);
    }
    min_sum = std::min(min_sum, sum_c);
    max_inv = std::max(max_inv, sum_inv);
  }
  const double rhs = 4.0 / min_sum * max_inv * optimal_cluster_loss(pop, cluster, refit);

  return {lhs, rhs, lhs <= rhs + 1e-9, false};
}

}  // namespace acquire
