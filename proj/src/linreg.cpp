#include "acquire/linreg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "acquire/rng.hpp"

namespace acquire {
namespace {

Mat draw_features(const Vec& phi, const Mat& cov, int n_i, const FeatureDist& dist, Rng& rng) {
  const int d = static_cast<int>(phi.size());
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sample_subpopulation: covariance must be SPD");
  const Mat chol = llt.matrixL();

  Mat x(n_i, d);
  for (int r = 0; r < n_i; ++r) {
    Vec z(d);
    for (int c = 0; c < d; ++c) {
      if (dist.kind == FeatureDist::Gaussian) {
        z(c) = rng.gaussian();
      } else {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double hit = rng.uniform() < dist.sparsity ? 1.0 : 0.0;
        z(c) = sign * hit / std::sqrt(dist.sparsity);
      }
    }
    x.row(r) = (chol * z).transpose();
  }
  return x;
}

bool full_column_rank(const Mat& x) {
  Eigen::ColPivHouseholderQR<Mat> qr(x);
  return qr.rank() == x.cols();
}

}  // namespace

Subpopulation sample_subpopulation(const Vec& phi, const Mat& cov, int n_i,
                                   const FeatureDist& dist, std::uint64_t rng_seed) {
  const int d = static_cast<int>(phi.size());
  if (n_i < d)
    throw std::invalid_argument("sample_subpopulation: requires n_i >= d");
  if (dist.kind == FeatureDist::RademacherScaled &&
      !(dist.sparsity > 0.0 && dist.sparsity <= 1.0))
    throw std::invalid_argument("sample_subpopulation: sparsity must be in (0, 1]");

  Rng rng(rng_seed);
  Mat x = draw_features(phi, cov, n_i, dist, rng);
  if (!full_column_rank(x)) {
    x = draw_features(phi, cov, n_i, dist, rng);  // one resample
    if (!full_column_rank(x))
      throw std::runtime_error("sample_subpopulation: rank-deficient features after resample");
  }

  Subpopulation sub;
  sub.features = std::move(x);
  sub.scores = sub.features * phi;
  sub.true_phi = phi;
  sub.true_cov = cov;
  sub.sigma2 = dist.variance_proxy();
  return sub;
}

double empirical_loss(const Subpopulation& sub, const Vec& theta) {
  if (theta.size() != sub.features.cols())
    throw std::invalid_argument("empirical_loss: dimension mismatch");
  const Vec residual = sub.features * theta - sub.scores;
  return residual.squaredNorm() / static_cast<double>(sub.features.rows());
}

Mat empirical_covariance(const Subpopulation& sub) {
  return sub.features.transpose() * sub.features / static_cast<double>(sub.features.rows());
}

Vec empirical_preference(const Subpopulation& sub) {
  Eigen::ColPivHouseholderQR<Mat> qr(sub.features);
  if (qr.rank() != sub.features.cols())
    throw std::runtime_error("empirical_preference: rank-deficient features");
  return qr.solve(sub.scores);
}

double empirical_alignment(const Subpopulation& sub_i, const Subpopulation& sub_j) {
  if (sub_i.features.cols() != sub_j.features.cols())
    throw std::invalid_argument("empirical_alignment: dimension mismatch");
  const Mat cov_i = empirical_covariance(sub_i);
  const Mat cov_j = empirical_covariance(sub_j);
  const double lij = min_generalized_eigenvalue(cov_i, cov_j);
  const double lji = min_generalized_eigenvalue(cov_j, cov_i);
  return 0.5 * std::min(lij, lji);
}

std::vector<SweepRow> concentration_sweep(std::span<const SweepConfig> configs,
                                          std::span<const Vec> theta_grid,
                                          std::span<const int> n_grid, int trials,
                                          std::uint64_t rng_seed, ExecPolicy policy) {
  if (configs.empty() || theta_grid.empty() || n_grid.empty() || trials < 1)
    throw std::invalid_argument("concentration_sweep: empty grid");

  std::vector<SweepRow> rows;
  for (std::size_t cfg = 0; cfg < configs.size(); ++cfg)
    for (std::size_t g = 0; g < n_grid.size(); ++g)
      rows.push_back({static_cast<int>(cfg), n_grid[g], configs[cfg].dist.variance_proxy(), 0.0});

  const int total = static_cast<int>(rows.size());
#pragma omp parallel for schedule(dynamic) if (policy == ExecPolicy::Parallel && total > 1)
  for (int r = 0; r < total; ++r) {
    const SweepConfig& cfg = configs[rows[r].config];
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      const std::uint64_t seed =
          Rng::derive(rng_seed, static_cast<std::uint64_t>(r) * 1000003ULL + trial);
      const Subpopulation sub =
          sample_subpopulation(cfg.phi, cfg.cov, rows[r].n, cfg.dist, seed);
      for (const Vec& theta : theta_grid) {
        const Vec diff = theta - cfg.phi;
        const double expected = diff.dot(cfg.cov * diff);
        if (expected <= 0.0) continue;  // theta == phi: both losses vanish
        const double observed = empirical_loss(sub, theta);
        worst = std::max(worst, std::abs(observed - expected) / expected);
      }
    }
    rows[r].max_rel_error = worst;
  }
  return rows;
}

void sweep_to_csv(std::span<const SweepRow> rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("sweep_to_csv: cannot write " + path);
  out << "n_i,sigma2,max_rel_error\n";
  char buf[64];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.max_rel_error);
    out << row.n << "," << row.sigma2 << "," << buf << "\n";
  }
}

}  // namespace acquire
