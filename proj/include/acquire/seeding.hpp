#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acquire/feedback.hpp"

namespace acquire {

enum class StrategyKind {
  Acquire,
  FairAcquire,
  Random,
  Greedy,
  EpsGreedy,
  BalancedRandom,
  BalancedGreedy,
  BalancedEpsGreedy,
};

/// A user-selection strategy. The epsilon-greedy variants carry a Gaussian
/// noise scale; when unset it defaults to 10% of the mean first-round loss.
struct Strategy {
  StrategyKind kind = StrategyKind::Acquire;
  std::optional<double> noise_scale;

  /// Whether selection criteria are divided by the chooser's group size.
  bool balanced() const {
    return kind == StrategyKind::FairAcquire || kind == StrategyKind::BalancedRandom ||
           kind == StrategyKind::BalancedGreedy || kind == StrategyKind::BalancedEpsGreedy;
  }

  static Strategy parse(const std::string& name);
  std::string name() const;
};

struct SeedingStep {
  std::vector<double> round_losses;     // empty on the first step (nothing deployed)
  std::vector<double> selection_probs;  // sums to 1; one-hot for greedy rules
  int chosen_user;
};

struct SeedingTrace {
  std::vector<SeedingStep> steps;
  bool stopped_early = false;  // all losses hit zero before k services
};

struct SeedingResult {
  ServiceSet services;
  SeedingTrace trace;
  QueryLedger ledger;
};

/// p_i proportional to losses[i] (times the inverse group weight when given),
/// normalized exactly. Rejects negative losses and all-zero mass.
std::vector<double> selection_distribution(std::span<const double> losses,
                                           std::span<const double> inverse_group_weights = {});

/// Runs one seeding pass against a feedback channel: first user per the
/// strategy's first-pick law, then k-1 rounds of deploy / select / query.
/// Stops early (with a flag) if every loss reaches zero.
SeedingResult run_strategy(const Strategy& strategy, FeedbackChannel& channel, int k,
                           std::uint64_t rng_seed);

SeedingResult acquire_seed(const Population& pop, int k, std::uint64_t rng_seed,
                           ExecPolicy policy = ExecPolicy::Parallel);
SeedingResult fair_acquire_seed(const Population& pop, int k, std::uint64_t rng_seed,
                                ExecPolicy policy = ExecPolicy::Parallel);
SeedingResult baseline_seed(const Strategy& strategy, const Population& pop, int k,
                            std::uint64_t rng_seed, ExecPolicy policy = ExecPolicy::Parallel);

/// Trace plus final services as JSON (the CLI --emit-trace payload).
std::string trace_to_json(const SeedingTrace& trace, const ServiceSet& services);

}  // namespace acquire
