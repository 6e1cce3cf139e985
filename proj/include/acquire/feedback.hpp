#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "acquire/parallel.hpp"
#include "acquire/population.hpp"

namespace acquire {

/// Ordered list of deployed service parameter vectors, with per-service
/// provenance (the queried user id, or -1 for an external center).
struct ServiceSet {
  std::vector<Vec> thetas;
  std::vector<int> origins;

  int size() const { return static_cast<int>(thetas.size()); }
  void add(Vec theta, int origin = -1) {
    thetas.push_back(std::move(theta));
    origins.push_back(origin);
  }
};

/// One deployment's bandit view: each user's minimum loss over the deployed
/// services and the index of the service attaining it.
struct FeedbackRound {
  std::vector<double> losses;
  std::vector<int> choices;
};

/// Append-only account of what the provider has learned. Algorithms never
/// read it; tests assert the query economics against it.
struct QueryLedger {
  std::vector<int> preference_queries;
  std::int64_t loss_observations = 0;
};

/// The service minimizing the user's loss, ties broken toward the lowest
/// service index. Returns (index, loss).
std::pair<int, double> user_choice(const UserProfile& user, const ServiceSet& services);

/// Deploys the services to the whole population and collects the per-user
/// chosen-service losses. Adds n loss observations to the ledger; no
/// preference vectors cross this boundary.
FeedbackRound deploy(const Population& pop, const ServiceSet& services, QueryLedger& ledger,
                     ExecPolicy policy = ExecPolicy::Parallel);

/// Reveals one user's preference vector and records the query.
Vec query_preference(const Population& pop, int user_id, QueryLedger& ledger);

/// The boundary the seeding strategies run against: loss feedback for
/// deployed services, explicit preference queries, and the group structure
/// (demographic identities are known a priori). Nothing else.
class FeedbackChannel {
 public:
  virtual ~FeedbackChannel() = default;
  virtual int user_count() const = 0;
  virtual const std::vector<int>& group_sizes() const = 0;
  virtual int group_of(int user_id) const = 0;
  virtual FeedbackRound deploy(const ServiceSet& services) = 0;
  virtual Vec query_preference(int user_id) = 0;
  virtual const QueryLedger& ledger() const = 0;
};

class PopulationChannel final : public FeedbackChannel {
 public:
  explicit PopulationChannel(const Population& pop, ExecPolicy policy = ExecPolicy::Parallel)
      : pop_(&pop), policy_(policy) {}

  int user_count() const override { return pop_->size(); }
  const std::vector<int>& group_sizes() const override { return pop_->group_sizes(); }
  int group_of(int user_id) const override { return pop_->user(user_id).group_id; }
  FeedbackRound deploy(const ServiceSet& services) override {
    return acquire::deploy(*pop_, services, ledger_, policy_);
  }
  Vec query_preference(int user_id) override {
    return acquire::query_preference(*pop_, user_id, ledger_);
  }
  const QueryLedger& ledger() const override { return ledger_; }

 private:
  const Population* pop_;
  ExecPolicy policy_;
  QueryLedger ledger_;
};

}  // namespace acquire
