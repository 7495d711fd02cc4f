#pragma once

#include <optional>

#include "kingflow/common.hpp"
#include "kingflow/ngd.hpp"

namespace kingflow {

struct MmdEstimate {
  enum class Estimator { VStat };

  double value = 0.0;
  double bandwidth = 1.0;
  Estimator estimator = Estimator::VStat;
};

/// Biased (V-statistic) MMD with a Gaussian kernel. The bandwidth defaults
/// to the median heuristic over a and b together.
MmdEstimate mmd(const ParticleSet& a, const ParticleSet& b,
                std::optional<double> bandwidth = std::nullopt);

/// Sample mean and (1/n) covariance plus 1e-9 I.
GaussianMoments fit_gaussian(const ParticleSet& points);

/// 2-Wasserstein distance between Gaussians (Bures formula).
double gaussian_w2(const VectorXd& mean1, const MatrixXd& cov1, const VectorXd& mean2,
                   const MatrixXd& cov2);
inline double gaussian_w2(const GaussianMoments& a, const GaussianMoments& b) {
  return gaussian_w2(a.mean, a.cov, b.mean, b.cov);
}

/// Mean over `points` of the distance to the nearest row of `reference`.
double mean_nearest_distance(const ParticleSet& points, const ParticleSet& reference);

}  // namespace kingflow
