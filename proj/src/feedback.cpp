#include "acquire/feedback.hpp"

#include <stdexcept>

namespace acquire {

std::pair<int, double> user_choice(const UserProfile& user, const ServiceSet& services) {
  if (services.size() < 1) throw std::invalid_argument("user_choice: empty service set");
  int best = 0;
  double best_loss = eval_loss(user.loss, services.thetas[0], user.preference);
  for (int j = 1; j < services.size(); ++j) {
    const double loss = eval_loss(user.loss, services.thetas[j], user.preference);
    if (loss < best_loss) {
      best = j;
      best_loss = loss;
    }
  }
  return {best, best_loss};
}

FeedbackRound deploy(const Population& pop, const ServiceSet& services, QueryLedger& ledger,
                     ExecPolicy policy) {
  if (services.size() < 1) throw std::invalid_argument("deploy: empty service set");
  const int n = pop.size();
  FeedbackRound round;
  round.losses.resize(n);
  round.choices.resize(n);
#pragma omp parallel for schedule(static) if (policy == ExecPolicy::Parallel && n > 64)
  for (int i = 0; i < n; ++i) {
    const auto [choice, loss] = user_choice(pop.user(i), services);
    round.losses[i] = loss;
    round.choices[i] = choice;
  }
  ledger.loss_observations += n;
  return round;
}

Vec query_preference(const Population& pop, int user_id, QueryLedger& ledger) {
  if (user_id < 0 || user_id >= pop.size())
    throw std::invalid_argument("query_preference: unknown user id");
  ledger.preference_queries.push_back(user_id);
  return pop.user(user_id).preference;
}

}  // namespace acquire
