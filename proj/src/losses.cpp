#include "acquire/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "acquire/rng.hpp"

namespace acquire {
namespace {

constexpr double kUnitNormTol = 1e-9;

void require_same_dim(const Vec& theta, const Vec& phi) {
  if (theta.size() != phi.size())
    throw std::invalid_argument("eval_loss: dimension mismatch between theta and phi");
}

void require_spd(const Mat& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw std::invalid_argument(std::string(what) + ": matrix must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!m.isApprox(m.transpose(), 1e-12 * scale))
    throw std::invalid_argument(std::string(what) + ": matrix must be symmetric");
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(std::string(what) + ": matrix must be positive-definite");
}

void require_unit(const Vec& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > kUnitNormTol)
    throw std::invalid_argument(std::string(what) + ": cosine loss requires unit-norm vectors");
}

double huber_value(double r, double delta) {
  return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

}  // namespace

LossModel LossModel::sq_mahalanobis(Mat sigma) {
  require_spd(sigma, "sq_mahalanobis");
  LossModel m;
  m.family_ = LossFamily::SqMahalanobis;
  m.sigma_ = std::move(sigma);
  return m;
}

LossModel LossModel::sq_euclidean(int dim) {
  if (dim < 1) throw std::invalid_argument("sq_euclidean: dimension must be >= 1");
  return sq_mahalanobis(Mat::Identity(dim, dim));
}

LossModel LossModel::huber(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("huber: delta must be positive");
  LossModel m;
  m.family_ = LossFamily::Huber;
  m.delta_ = delta;
  return m;
}

LossModel LossModel::cosine() {
  LossModel m;
  m.family_ = LossFamily::Cosine;
  return m;
}

LossModel LossModel::metric_l2() {
  LossModel m;
  m.family_ = LossFamily::MetricL2;
  return m;
}

LossModel LossModel::lipschitz_sc(double lipschitz, double mu) {
  if (!(mu > 0.0) || !(mu <= lipschitz))
    throw std::invalid_argument("lipschitz_sc: requires 0 < mu <= lipschitz");
  LossModel m;
  m.family_ = LossFamily::LipschitzSc;
  m.lipschitz_ = lipschitz;
  m.mu_ = mu;
  return m;
}

double eval_loss(const LossModel& model, const Vec& theta, const Vec& phi) {
  require_same_dim(theta, phi);
  switch (model.family()) {
    case LossFamily::SqMahalanobis: {
      if (model.sigma().rows() != theta.size())
        throw std::invalid_argument("eval_loss: covariance dimension mismatch");
      const Vec diff = theta - phi;
      return diff.dot(model.sigma() * diff);
    }
    case LossFamily::Huber:
      return huber_value((theta - phi).norm(), model.delta());
    case LossFamily::Cosine: {
      require_unit(theta, "eval_loss");
      require_unit(phi, "eval_loss");
      return std::max(0.0, 1.0 - theta.dot(phi));
    }
    case LossFamily::MetricL2:
      return (theta - phi).norm();
    case LossFamily::LipschitzSc:
      return 0.5 * model.mu() * (theta - phi).squaredNorm();
  }
  throw std::logic_error("eval_loss: unknown family");
}

double min_generalized_eigenvalue(const Mat& a, const Mat& b) {
  require_spd(a, "min_generalized_eigenvalue(A)");
  require_spd(b, "min_generalized_eigenvalue(B)");
  if (a.rows() != b.rows())
    throw std::invalid_argument("min_generalized_eigenvalue: shape mismatch");
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> solver(a, b, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("min_generalized_eigenvalue: solver failed");
  return solver.eigenvalues()(0);
}

double alignment_constant(const LossModel& a, const LossModel& b) {
  if (a.family() != b.family())
    throw std::invalid_argument("alignment_constant: cross-family pairs are not defined");
  switch (a.family()) {
    case LossFamily::Huber:
      return 1.0 / 3.0;
    case LossFamily::Cosine:
      return 0.5;
    case LossFamily::MetricL2:
      return 1.0;
    case LossFamily::LipschitzSc:
      return std::min(a.mu(), b.mu()) / std::max(a.lipschitz(), b.lipschitz());
    case LossFamily::SqMahalanobis: {
      const double lab = min_generalized_eigenvalue(a.sigma(), b.sigma());
      const double lba = min_generalized_eigenvalue(b.sigma(), a.sigma());
      return 0.5 * std::min(lab, lba);
    }
  }
  throw std::logic_error("alignment_constant: unknown family");
}

Mat alignment_matrix(std::span<const LossModel* const> models) {
  const int n = static_cast<int>(models.size());
  if (n < 1) throw std::invalid_argument("alignment_matrix: empty model list");
  Mat c(n, n);
  for (int i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = alignment_constant(*models[i], *models[j]);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

AssumptionReport check_assumptions(const LossModel& model_i, const Vec& phi_i,
                                   const LossModel& model_j, const Vec& phi_j,
                                   double c, int num_samples, std::uint64_t rng_seed) {
  if (!(c > 0.0)) throw std::invalid_argument("check_assumptions: c must be positive");
  if (num_samples < 1) throw std::invalid_argument("check_assumptions: num_samples must be >= 1");
  require_same_dim(phi_i, phi_j);

  const int d = static_cast<int>(phi_i.size());
  const bool on_sphere = model_i.family() == LossFamily::Cosine;
  const double spread = std::max(1.0, (phi_i - phi_j).norm());
  const double radii[3] = {0.5 * spread, spread, 2.0 * spread};
  const Vec zero = Vec::Zero(d);
  const Vec* centers[3] = {&phi_i, &phi_j, &zero};

  const double cross_ij = eval_loss(model_j, phi_i, phi_j);  // L_j(phi_i, phi_j)
  const double cross_ji = eval_loss(model_i, phi_j, phi_i);  // L_i(phi_j, phi_i)

  Rng rng(rng_seed);
  AssumptionReport report;
  report.samples_checked = num_samples;
  constexpr double kSlack = 1e-9;

  for (int s = 0; s < num_samples; ++s) {
    Vec theta = *centers[s % 3];
    const double radius = radii[(s / 3) % 3];
    for (int k = 0; k < d; ++k) theta(k) += radius * rng.gaussian();
    if (on_sphere) {
      if (theta.norm() < 1e-12) theta(0) += 1.0;
      theta.normalize();
    }
    const double li = eval_loss(model_i, theta, phi_i);
    const double lj = eval_loss(model_j, theta, phi_j);

    const double excess1 = c * li - (lj + cross_ij);
    if (excess1 > kSlack) {
      report.violations.push_back({s, 1, excess1, theta});
      report.max_violation = std::max(report.max_violation, excess1);
    }
    const double excess2 = c * cross_ji - (lj + li);
    if (excess2 > kSlack) {
      report.violations.push_back({s, 2, excess2, theta});
      report.max_violation = std::max(report.max_violation, excess2);
    }
  }
  return report;
}

namespace {

double weighted_objective(std::span<const RefitMember> members, std::span<const double> weights,
                          const Vec& theta) {
  double total = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (weights[i] > 0.0) total += weights[i] * eval_loss(*members[i].model, theta, *members[i].phi);
  }
  return total;
}

Vec weighted_gradient(std::span<const RefitMember> members, std::span<const double> weights,
                      const Vec& theta) {
  Vec grad = Vec::Zero(theta.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double w = weights[i];
    if (w <= 0.0) continue;
    const LossModel& m = *members[i].model;
    const Vec diff = theta - *members[i].phi;
    switch (m.family()) {
      case LossFamily::SqMahalanobis:
        grad += 2.0 * w * (m.sigma() * diff);
        break;
      case LossFamily::Huber: {
        const double r = diff.norm();
        if (r <= m.delta())
          grad += w * diff;
        else
          grad += w * m.delta() / r * diff;
        break;
      }
      case LossFamily::MetricL2: {
        const double r = diff.norm();
        if (r > 1e-15) grad += w / r * diff;  // subgradient 0 at the kink
        break;
      }
      case LossFamily::LipschitzSc:
        grad += w * m.mu() * diff;
        break;
      case LossFamily::Cosine:
        throw std::logic_error("weighted_gradient: cosine handled separately");
    }
  }
  return grad;
}

Vec refit_center_iterative(std::span<const RefitMember> members, std::span<const double> weights,
                           const RefitOptions& opts) {
  const int d = static_cast<int>(members[0].phi->size());
  double total_weight = 0.0;
  Vec theta = Vec::Zero(d);
  for (std::size_t i = 0; i < members.size(); ++i) {
    theta += weights[i] * *members[i].phi;
    total_weight += weights[i];
  }
  theta /= total_weight;

  double f = weighted_objective(members, weights, theta);
  double step = 1.0 / total_weight;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Vec grad = weighted_gradient(members, weights, theta);
    const double gnorm = grad.norm();
    if (gnorm <= opts.tol) return theta;
    // Backtracking line search with Armijo condition.
    double t = step * 2.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Vec candidate = theta - t * grad;
      const double fc = weighted_objective(members, weights, candidate);
      if (fc <= f - 1e-4 * t * gnorm * gnorm) {
        theta = candidate;
        const double improvement = f - fc;
        f = fc;
        step = t;
        accepted = true;
        // Objective stagnation: the minimizer sits at a kink of a
        // non-smooth family and the gradient norm cannot reach tol.
        if (improvement <= 1e-15 * std::max(1.0, f)) return theta;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) return theta;  // step size collapsed; theta is at the kink
  }
  throw std::runtime_error("refit_center: no convergence within iteration cap");
}

}  // namespace

Vec refit_center(std::span<const RefitMember> members, std::span<const double> weights,
                 const RefitOptions& opts) {
  if (members.empty()) throw std::invalid_argument("refit_center: empty member list");
  if (members.size() != weights.size())
    throw std::invalid_argument("refit_center: weights size mismatch");
  double total_weight = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0 || !std::isfinite(weights[i]))
      throw std::invalid_argument("refit_center: weights must be finite and nonnegative");
    if (weights[i] > 0.0) last_positive = static_cast<int>(i);
    total_weight += weights[i];
  }
  if (total_weight <= 0.0)
    throw std::invalid_argument("refit_center: weights must not all be zero");

  int positive_count = 0;
  for (double w : weights)
    if (w > 0.0) ++positive_count;
  if (positive_count == 1) return *members[last_positive].phi;  // unique minimizer

  bool all_sq = true, all_cos = true, any_cos = false;
  for (const RefitMember& m : members) {
    all_sq = all_sq && m.model->family() == LossFamily::SqMahalanobis;
    const bool cos = m.model->family() == LossFamily::Cosine;
    all_cos = all_cos && cos;
    any_cos = any_cos || cos;
  }

  if (all_sq) {
    const int d = static_cast<int>(members[0].phi->size());
    Mat acc = Mat::Zero(d, d);
    Vec rhs = Vec::Zero(d);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i] * members[i].model->sigma();
      rhs += weights[i] * (members[i].model->sigma() * *members[i].phi);
    }
    Eigen::LLT<Mat> llt(acc);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("refit_center: singular accumulated covariance");
    return llt.solve(rhs);
  }

  if (all_cos) {
    Vec mean = Vec::Zero(members[0].phi->size());
    for (std::size_t i = 0; i < members.size(); ++i) mean += weights[i] * *members[i].phi;
    const double norm = mean.norm();
    if (norm < 1e-12)
      throw std::runtime_error("refit_center: degenerate cosine refit (antipodal members)");
    return mean / norm;
  }

  if (any_cos)
    throw std::invalid_argument("refit_center: cosine members cannot mix with other families");

  return refit_center_iterative(members, weights, opts);
}

}  // namespace acquire
