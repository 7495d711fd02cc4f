#include "kingflow/ngd.hpp"

#include <cmath>

namespace kingflow {

namespace {

bool is_pd(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) return false;
  const MatrixXd l = llt.matrixL();
  return (l.diagonal().array() > 0.0).all() && l.allFinite();
}

}  // namespace

NatGradResult natural_gradient_from_gap(const FeatureMap& map, VectorXd gap,
                                        const ParticleSet& particles, double jitter) {
  if (gap.size() != map.feature_dim()) throw InvalidInput("natural gradient: gap dimension mismatch");
  NatGradResult out;
  out.fisher = fisher_estimate(map, particles, jitter);
  out.natural_direction = out.fisher.solve(gap);
  out.gap = std::move(gap);
  return out;
}

NatGradResult natural_gradient_kl(const FeatureMap& map, const ParticleSet& targets,
                                  const ParticleSet& particles, double jitter) {
  if (targets.empty()) throw InvalidInput("natural_gradient_kl: no target samples");
  VectorXd gap = mean_features(map, targets) - mean_features(map, particles);
  return natural_gradient_from_gap(map, std::move(gap), particles, jitter);
}

GaussianNaturalParams gaussian_moment_to_natural(const VectorXd& mean, const MatrixXd& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw InvalidInput("gaussian_moment_to_natural: shape mismatch");
  Eigen::LLT<MatrixXd> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success || !is_pd(cov))
    throw InvalidInput("gaussian_moment_to_natural: covariance is not positive definite");
  MatrixXd precision = llt.solve(MatrixXd::Identity(mean.size(), mean.size()));
  precision = 0.5 * (precision + precision.transpose());
  return GaussianNaturalParams{precision * mean, -0.5 * precision};
}

GaussianMoments gaussian_natural_to_moment(const GaussianNaturalParams& params) {
  const Index d = params.eta1.size();
  if (params.eta2.rows() != d || params.eta2.cols() != d)
    throw InvalidInput("gaussian_natural_to_moment: shape mismatch");
  const MatrixXd precision = -2.0 * params.eta2;
  if (!is_pd(precision))
    throw InvalidInput("gaussian_natural_to_moment: -2 eta2 is not positive definite");
  Eigen::LLT<MatrixXd> llt(0.5 * (precision + precision.transpose()));
  MatrixXd cov = llt.solve(MatrixXd::Identity(d, d));
  cov = 0.5 * (cov + cov.transpose());
  return GaussianMoments{cov * params.eta1, cov};
}

VectorXd gaussian_theta(const GaussianNaturalParams& params) {
  const int d = params.dim();
  VectorXd theta(d + d * (d + 1) / 2);
  theta.head(d) = params.eta1;
  Index k = d;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      theta(k++) = i == j ? params.eta2(i, i) : params.eta2(i, j) + params.eta2(j, i);
  return theta;
}

GaussianNaturalParams gaussian_from_theta(const VectorXd& theta, int dim) {
  if (theta.size() != dim + dim * (dim + 1) / 2)
    throw InvalidInput("gaussian_from_theta: wrong parameter length");
  GaussianNaturalParams p{theta.head(dim), MatrixXd::Zero(dim, dim)};
  Index k = dim;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      if (i == j) {
        p.eta2(i, i) = theta(k);
      } else {
        p.eta2(i, j) = 0.5 * theta(k);
        p.eta2(j, i) = 0.5 * theta(k);
      }
      ++k;
    }
  }
  return p;
}

ParticleSet sample_gaussian(const VectorXd& mean, const MatrixXd& cov, Index n,
                            std::uint64_t seed) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw InvalidInput("sample_gaussian: shape mismatch");
  Eigen::LLT<MatrixXd> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success) throw InvalidInput("sample_gaussian: covariance is not PD");
  const MatrixXd lower = llt.matrixL();
  Rng rng(seed);
  MatrixXd z = standard_normal(rng, n, mean.size());
  MatrixXd x = z * lower.transpose();
  x.rowwise() += mean.transpose();
  return ParticleSet(std::move(x));
}

GaussianNaturalParams exact_ngd_step(const GaussianNaturalParams& params,
                                     const ParticleSet& targets, double step, int mc_samples,
                                     std::uint64_t seed, double jitter) {
  if (!(step > 0.0)) throw InvalidInput("exact_ngd_step: step must be positive");
  if (mc_samples < 100) throw InvalidInput("exact_ngd_step: need at least 100 Monte Carlo samples");
  const int d = params.dim();
  if (targets.dim() != d) throw InvalidInput("exact_ngd_step: target dimension mismatch");

  const GaussianMoments moments = gaussian_natural_to_moment(params);
  const ParticleSet model = sample_gaussian(moments.mean, moments.cov, mc_samples, seed);
  const NatGradResult ng =
      natural_gradient_kl(FeatureMap::gaussian_quadratic(d), targets, model, jitter);

  const VectorXd theta = gaussian_theta(params);
  double eps = step;
  for (int halving = 0; halving <= kMaxStepHalvings; ++halving, eps *= 0.5) {
    GaussianNaturalParams next = gaussian_from_theta(theta + eps * ng.natural_direction, d);
    if (is_pd(-2.0 * next.eta2)) return next;
  }
  throw StepFailure("exact_ngd_step: step left the Gaussian cone after 10 halvings");
}

}  // namespace kingflow
