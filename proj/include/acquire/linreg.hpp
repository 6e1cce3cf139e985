#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acquire/losses.hpp"
#include "acquire/parallel.hpp"

namespace acquire {

/// How subpopulation features are drawn. Both samplers have unit-variance
/// coordinates before the covariance shaping; sparsity < 1 puts the
/// Rademacher mass on rarer, larger spikes, raising the sub-Gaussian
/// variance proxy to 1/sparsity without changing the covariance.
struct FeatureDist {
  enum Kind { Gaussian, RademacherScaled } kind = Gaussian;
  double sparsity = 1.0;  // RademacherScaled only, in (0, 1]

  static FeatureDist gaussian() { return {Gaussian, 1.0}; }
  static FeatureDist rademacher(double sparsity = 1.0) { return {RademacherScaled, sparsity}; }
  double variance_proxy() const { return kind == Gaussian ? 1.0 : 1.0 / sparsity; }
};

/// A linear-prediction subpopulation: n_i feature rows, noiseless scores
/// y = X phi, the generating parameters, and the sampler's variance proxy.
struct Subpopulation {
  Mat features;
  Vec scores;
  Vec true_phi;
  Mat true_cov;
  double sigma2 = 1.0;
};

/// Draws n_i feature rows i.i.d. with covariance cov and builds the noiseless
/// scores. Validates full column rank (resamples once on failure).
Subpopulation sample_subpopulation(const Vec& phi, const Mat& cov, int n_i,
                                   const FeatureDist& dist, std::uint64_t rng_seed);

/// (1/n_i) sum_j (theta' x_j - y_j)^2, the provider's bandit observable.
double empirical_loss(const Subpopulation& sub, const Vec& theta);

/// X' X / n_i.
Mat empirical_covariance(const Subpopulation& sub);

/// Least-squares recovery of the preference; exact in the noiseless model.
Vec empirical_preference(const Subpopulation& sub);

/// (1/2) min{lambda_min(S_i, S_j), lambda_min(S_j, S_i)} on the empirical
/// covariances.
double empirical_alignment(const Subpopulation& sub_i, const Subpopulation& sub_j);

struct SweepConfig {
  Mat cov;
  Vec phi;
  FeatureDist dist;
};

struct SweepRow {
  int config = 0;
  int n = 0;
  double sigma2 = 0.0;
  double max_rel_error = 0.0;  // max over thetas and trials of |Lhat - L| / L
};

/// For each (config, n in n_grid), the worst relative deviation between the
/// empirical loss and the expected loss over a theta grid and `trials`
/// freshly sampled subpopulations. Rows where the expected loss is zero
/// contribute zero error.
std::vector<SweepRow> concentration_sweep(std::span<const SweepConfig> configs,
                                          std::span<const Vec> theta_grid,
                                          std::span<const int> n_grid, int trials,
                                          std::uint64_t rng_seed,
                                          ExecPolicy policy = ExecPolicy::Parallel);

void sweep_to_csv(std::span<const SweepRow> rows, const std::string& path);

}  // namespace acquire
