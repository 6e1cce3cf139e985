#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace acquire {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class LossFamily {
  SqMahalanobis,  // (theta - phi)' Sigma (theta - phi), Sigma SPD
  Huber,          // quadratic core of width delta, linear tail (Euclidean norm)
  Cosine,         // 1 - theta' phi on the unit sphere
  MetricL2,       // plain Euclidean distance
  LipschitzSc,    // (mu/2) ||theta - phi||^2, Lipschitz constant L on the
                  // operative ball of radius L/mu around the minimizer
};

/// A user's loss family plus its parameters. Instances are validated at
/// construction and immutable afterwards.
class LossModel {
 public:
  static LossModel sq_mahalanobis(Mat sigma);
  static LossModel sq_euclidean(int dim);  // sq_mahalanobis with identity
  static LossModel huber(double delta);
  static LossModel cosine();
  static LossModel metric_l2();
  static LossModel lipschitz_sc(double lipschitz, double mu);

  LossFamily family() const { return family_; }
  const Mat& sigma() const { return sigma_; }
  double delta() const { return delta_; }
  double lipschitz() const { return lipschitz_; }
  double mu() const { return mu_; }

 private:
  LossModel() = default;
  LossFamily family_ = LossFamily::MetricL2;
  Mat sigma_;
  double delta_ = 0.0;
  double lipschitz_ = 0.0;
  double mu_ = 0.0;
};

/// L(theta, phi) for the given model. Nonnegative, zero exactly at
/// theta == phi. Cosine requires both arguments unit-norm within 1e-9.
double eval_loss(const LossModel& model, const Vec& theta, const Vec& phi);

/// Smallest lambda solving A v = lambda B v for an SPD pencil, computed by
/// Cholesky reduction of B. Satisfies lambda_min(A,B) * lambda_max(B,A) = 1.
double min_generalized_eigenvalue(const Mat& a, const Mat& b);

/// The pairwise alignment constant for two models of the same family:
///   Huber -> 1/3, Cosine -> 1/2, MetricL2 -> 1,
///   LipschitzSc -> min(mu_i, mu_j) / max(L_i, L_j),
///   SqMahalanobis -> (1/2) min{lambda_min(S_i,S_j), lambda_min(S_j,S_i)}.
/// Symmetric in its arguments; cross-family pairs are rejected.
double alignment_constant(const LossModel& a, const LossModel& b);

/// Symmetric n x n matrix of pairwise alignment constants with the diagonal
/// fixed at 1 (the same-user convention).
Mat alignment_matrix(std::span<const LossModel* const> models);

struct AssumptionViolation {
  int sample;       // index of the sampled theta
  int inequality;   // 1 or 2
  double excess;    // amount by which the inequality failed
  Vec theta;
};

struct AssumptionReport {
  std::vector<AssumptionViolation> violations;
  double max_violation = 0.0;
  int samples_checked = 0;
};

/// Samples theta from standard Gaussians at three radii around each of
/// {phi_i, phi_j, 0} and records every point where one of the approximate
/// triangle inequalities fails by more than 1e-9 at constant c:
///   (1) c L_i(theta, phi_i) <= L_j(theta, phi_j) + L_j(phi_i, phi_j)
///   (2) c L_i(phi_j, phi_i) <= L_j(theta, phi_j) + L_i(theta, phi_i)
AssumptionReport check_assumptions(const LossModel& model_i, const Vec& phi_i,
                                   const LossModel& model_j, const Vec& phi_j,
                                   double c, int num_samples, std::uint64_t rng_seed);

struct RefitMember {
  const LossModel* model;
  const Vec* phi;
};

struct RefitOptions {
  double tol = 1e-8;    // gradient-norm target for iterative families
  int max_iter = 10000;
};

/// argmin over theta of sum_i w_i L_i(theta, phi_i).
///
/// Closed form for all-SqMahalanobis members, normalized weighted mean for
/// all-Cosine members, gradient descent with backtracking line search
/// otherwise (initialized at the weighted Euclidean mean).
Vec refit_center(std::span<const RefitMember> members, std::span<const double> weights,
                 const RefitOptions& opts = {});

}  // namespace acquire
