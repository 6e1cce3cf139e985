#include "acquire/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "acquire/rng.hpp"

namespace acquire {
namespace {

std::vector<double> one_hot(int n, int index) {
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return p;
}

int argmax_lowest_id(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace

Strategy Strategy::parse(const std::string& name) {
  if (name == "acquire") return {StrategyKind::Acquire, {}};
  if (name == "fair_acquire") return {StrategyKind::FairAcquire, {}};
  if (name == "random") return {StrategyKind::Random, {}};
  if (name == "greedy") return {StrategyKind::Greedy, {}};
  if (name == "eps_greedy") return {StrategyKind::EpsGreedy, {}};
  if (name == "balanced_random") return {StrategyKind::BalancedRandom, {}};
  if (name == "balanced_greedy") return {StrategyKind::BalancedGreedy, {}};
  if (name == "balanced_eps_greedy") return {StrategyKind::BalancedEpsGreedy, {}};
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string Strategy::name() const {
  switch (kind) {
    case StrategyKind::Acquire: return "acquire";
    case StrategyKind::FairAcquire: return "fair_acquire";
    case StrategyKind::Random: return "random";
    case StrategyKind::Greedy: return "greedy";
    case StrategyKind::EpsGreedy: return "eps_greedy";
    case StrategyKind::BalancedRandom: return "balanced_random";
    case StrategyKind::BalancedGreedy: return "balanced_greedy";
    case StrategyKind::BalancedEpsGreedy: return "balanced_eps_greedy";
  }
  return "unknown";
}

std::vector<double> selection_distribution(std::span<const double> losses,
                                           std::span<const double> inverse_group_weights) {
  if (!inverse_group_weights.empty() && inverse_group_weights.size() != losses.size())
    throw std::invalid_argument("selection_distribution: weight size mismatch");
  std::vector<double> mass(losses.size());
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] < 0.0 || !std::isfinite(losses[i]))
      throw std::invalid_argument("selection_distribution: losses must be finite and nonnegative");
    const double w = inverse_group_weights.empty() ? 1.0 : inverse_group_weights[i];
    if (!(w > 0.0))
      throw std::invalid_argument("selection_distribution: weights must be positive");
    mass[i] = losses[i] * w;
    total += mass[i];
  }
  if (total <= 0.0)
    throw std::invalid_argument("selection_distribution: at least one loss must be positive");
  for (double& m : mass) m /= total;
  return mass;
}

SeedingResult run_strategy(const Strategy& strategy, FeedbackChannel& channel, int k,
                           std::uint64_t rng_seed) {
  const int n = channel.user_count();
  if (k < 1 || k > n) throw std::invalid_argument("run_strategy: k must be in [1, n]");
  if (strategy.noise_scale && !(*strategy.noise_scale > 0.0))
    throw std::invalid_argument("run_strategy: noise scale must be positive");

  // Per-user 1/|group| for the balanced variants, flat weights otherwise.
  std::vector<double> inv_weights(n, 1.0);
  if (strategy.balanced()) {
    const std::vector<int>& sizes = channel.group_sizes();
    for (int i = 0; i < n; ++i) inv_weights[i] = 1.0 / sizes[channel.group_of(i)];
  }

  Rng rng(rng_seed);
  SeedingResult result;

  // First pick: uniform over users, or proportional to 1/|group|.
  {
    const int chosen = rng.sample_weighted(inv_weights);
    const double total = std::accumulate(inv_weights.begin(), inv_weights.end(), 0.0);
    std::vector<double> probs(inv_weights);
    for (double& p : probs) p /= total;
    result.trace.steps.push_back({{}, std::move(probs), chosen});
    result.services.add(channel.query_preference(chosen), chosen);
  }

  std::optional<double> noise_scale = strategy.noise_scale;
  for (int t = 2; t <= k; ++t) {
    const FeedbackRound round = channel.deploy(result.services);
    const double total_loss = std::accumulate(round.losses.begin(), round.losses.end(), 0.0);
    if (total_loss <= 0.0) {
      result.trace.stopped_early = true;
      break;
    }

    int chosen = -1;
    std::vector<double> probs;
    switch (strategy.kind) {
      case StrategyKind::Acquire:
      case StrategyKind::FairAcquire: {
        std::vector<double> mass(n);
        for (int i = 0; i < n; ++i) mass[i] = round.losses[i] * inv_weights[i];
        chosen = rng.sample_weighted(mass);
        probs = selection_distribution(round.losses,
                                       strategy.balanced() ? std::span<const double>(inv_weights)
                                                           : std::span<const double>());
        break;
      }
      case StrategyKind::Random:
      case StrategyKind::BalancedRandom: {
        chosen = rng.sample_weighted(inv_weights);
        const double total = std::accumulate(inv_weights.begin(), inv_weights.end(), 0.0);
        probs = inv_weights;
        for (double& p : probs) p /= total;
        break;
      }
      case StrategyKind::Greedy:
      case StrategyKind::BalancedGreedy: {
        std::vector<double> criterion(n);
        for (int i = 0; i < n; ++i) criterion[i] = round.losses[i] * inv_weights[i];
        chosen = argmax_lowest_id(criterion);
        probs = one_hot(n, chosen);
        break;
      }
      case StrategyKind::EpsGreedy:
      case StrategyKind::BalancedEpsGreedy: {
        if (!noise_scale)
          noise_scale = 0.1 * total_loss / n;  // 10% of the mean first-round loss
        std::vector<double> criterion(n);
        for (int i = 0; i < n; ++i)
          criterion[i] = (round.losses[i] + *noise_scale * rng.gaussian()) * inv_weights[i];
        chosen = argmax_lowest_id(criterion);
        probs = one_hot(n, chosen);
        break;
      }
    }
    result.trace.steps.push_back({round.losses, std::move(probs), chosen});
    result.services.add(channel.query_preference(chosen), chosen);
  }

  result.ledger = channel.ledger();
  return result;
}

SeedingResult acquire_seed(const Population& pop, int k, std::uint64_t rng_seed,
                           ExecPolicy policy) {
  PopulationChannel channel(pop, policy);
  return run_strategy({StrategyKind::Acquire, {}}, channel, k, rng_seed);
}

SeedingResult fair_acquire_seed(const Population& pop, int k, std::uint64_t rng_seed,
                                ExecPolicy policy) {
  PopulationChannel channel(pop, policy);
  return run_strategy({StrategyKind::FairAcquire, {}}, channel, k, rng_seed);
}

SeedingResult baseline_seed(const Strategy& strategy, const Population& pop, int k,
                            std::uint64_t rng_seed, ExecPolicy policy) {
  PopulationChannel channel(pop, policy);
  return run_strategy(strategy, channel, k, rng_seed);
}

std::string trace_to_json(const SeedingTrace& trace, const ServiceSet& services) {
  nlohmann::json out;
  out["stopped_early"] = trace.stopped_early;
  out["steps"] = nlohmann::json::array();
  for (const SeedingStep& step : trace.steps) {
    out["steps"].push_back({{"round_losses", step.round_losses},
                            {"selection_probs", step.selection_probs},
                            {"chosen_user", step.chosen_user}});
  }
  out["final_services"] = nlohmann::json::array();
  for (int j = 0; j < services.size(); ++j) {
    const Vec& theta = services.thetas[j];
    out["final_services"].push_back(
        {{"theta", std::vector<double>(theta.data(), theta.data() + theta.size())},
         {"origin", services.origins[j]}});
  }
  return out.dump(2);
}

}  // namespace acquire
