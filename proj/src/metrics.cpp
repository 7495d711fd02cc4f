#include "kingflow/metrics.hpp"

#include <cmath>
#include <limits>

#include "kingflow/kernels.hpp"
#include "kingflow/linalg.hpp"

namespace kingflow {

namespace {

double mean_gram(const MatrixXd& a, const MatrixXd& b, double sigma) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Index j = 0; j < b.rows(); ++j) row += std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    acc += row;
  }
  return acc / static_cast<double>(a.rows() * b.rows());
}

bool is_pd(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

MmdEstimate mmd(const ParticleSet& a, const ParticleSet& b, std::optional<double> bandwidth) {
  if (a.empty() || b.empty()) throw InvalidInput("mmd: empty sample set");
  if (a.dim() != b.dim()) throw InvalidInput("mmd: dimension mismatch");
  MmdEstimate out;
  out.bandwidth = bandwidth ? *bandwidth : median_heuristic(a, b);
  if (!(out.bandwidth > 0.0)) throw InvalidInput("mmd: bandwidth must be positive");
  const double aa = mean_gram(a.points, a.points, out.bandwidth);
  const double bb = mean_gram(b.points, b.points, out.bandwidth);
  const double ab = mean_gram(a.points, b.points, out.bandwidth);
  out.value = std::sqrt(std::max(aa + bb - 2.0 * ab, 0.0));
  return out;
}

GaussianMoments fit_gaussian(const ParticleSet& points) {
  if (points.size() < points.dim() + 1) throw InvalidInput("fit_gaussian: need at least d + 1 points");
  GaussianMoments g;
  g.mean = pairwise_mean_rows(points.points);
  g.cov = population_covariance(points.points, g.mean);
  g.cov.diagonal().array() += 1e-9;
  return g;
}

double gaussian_w2(const VectorXd& mean1, const MatrixXd& cov1, const VectorXd& mean2,
                   const MatrixXd& cov2) {
  if (mean1.size() != mean2.size() || cov1.rows() != mean1.size() || cov2.rows() != mean2.size())
    throw InvalidInput("gaussian_w2: shape mismatch");
  if (!is_pd(cov1) || !is_pd(cov2)) throw InvalidInput("gaussian_w2: covariances must be PD");
  const MatrixXd root2 = sym_sqrt(cov2);
  const MatrixXd cross = sym_sqrt(root2 * cov1 * root2);
  const double trace = (cov1 + cov2 - 2.0 * cross).trace();
  return std::sqrt(std::max((mean1 - mean2).squaredNorm() + trace, 0.0));
}

double mean_nearest_distance(const ParticleSet& points, const ParticleSet& reference) {
  if (points.empty() || reference.empty()) throw InvalidInput("mean_nearest_distance: empty set");
  double acc = 0.0;
  for (Index i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < reference.size(); ++j)
      best = std::min(best, (points.points.row(i) - reference.points.row(j)).squaredNorm());
    acc += std::sqrt(best);
  }
  return acc / static_cast<double>(points.size());
}

}  // namespace kingflow
