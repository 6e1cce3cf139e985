#pragma once

#include <map>
#include <string>
#include <vector>

#include "acquire/losses.hpp"

namespace acquire {

struct UserProfile {
  int user_id;
  Vec preference;
  LossModel loss;
  int group_id;
};

/// An immutable set of n users with preferences, loss models, and a partition
/// into m demographic groups. Group ids are dense 0..m-1 in first-appearance
/// order of the input labels.
class Population {
 public:
  static Population from_users(std::vector<UserProfile> users,
                               std::vector<std::string> group_labels);

  int size() const { return static_cast<int>(users_.size()); }
  int dim() const { return dim_; }
  int group_count() const { return static_cast<int>(groups_.size()); }

  const UserProfile& user(int i) const { return users_.at(i); }
  const std::vector<UserProfile>& users() const { return users_; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  const std::vector<int>& group_sizes() const { return group_sizes_; }
  const std::vector<std::string>& group_labels() const { return group_labels_; }

  /// Per-user 1/|group| weights, as used by the fair and balanced strategies.
  std::vector<double> inverse_group_weights() const;

 private:
  Population() = default;
  std::vector<UserProfile> users_;
  std::vector<std::vector<int>> groups_;
  std::vector<int> group_sizes_;
  std::vector<std::string> group_labels_;
  int dim_ = 0;
};

enum class IngestFormat { Jsonl, Csv };

/// Loads a population from disk.
///
/// JSONL: one user per line,
///   {"user_id": int, "group": str, "phi": [..],
///    "loss": {"family": str, "params": {..}}}
/// with families sq_mahalanobis (params.sigma: d x d), huber (params.delta),
/// cosine, metric_l2, lipschitz_sc (params.lipschitz, params.mu).
///
/// CSV: header user_id,group,phi_0..phi_{d-1},family plus the family param
/// columns delta, lipschitz, mu, sigma_r_c as needed.
Population load_population(const std::string& path, IngestFormat format);
Population load_population(const std::string& path);  // format from extension

void save_population_jsonl(const Population& pop, const std::string& path);

std::map<int, int> group_sizes(const Population& pop);

Mat alignment_matrix(const Population& pop);

}  // namespace acquire
