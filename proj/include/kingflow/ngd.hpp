#pragma once

#include "kingflow/common.hpp"
#include "kingflow/manifold.hpp"

namespace kingflow {

/// Natural gradient of KL[p, q] on M(T), estimated from samples.
///
/// `gap` is mu_p - mu_q and `natural_direction` = F^{-1} gap is the
/// KL-descent direction in natural coordinates (the negated natural gradient).
struct NatGradResult {
  VectorXd gap;
  FisherMatrix fisher;
  VectorXd natural_direction;
};

NatGradResult natural_gradient_kl(const FeatureMap& map, const ParticleSet& targets,
                                  const ParticleSet& particles, double jitter);

/// Builds the result from a precomputed gap and the particles' Fisher matrix.
NatGradResult natural_gradient_from_gap(const FeatureMap& map, VectorXd gap,
                                        const ParticleSet& particles, double jitter);

/// Natural parameters of N(mean, cov): eta1 = cov^{-1} mean, eta2 = -cov^{-1}/2.
struct GaussianNaturalParams {
  VectorXd eta1;
  MatrixXd eta2;

  int dim() const { return static_cast<int>(eta1.size()); }
};

struct GaussianMoments {
  VectorXd mean;
  MatrixXd cov;
};

GaussianNaturalParams gaussian_moment_to_natural(const VectorXd& mean, const MatrixXd& cov);
GaussianMoments gaussian_natural_to_moment(const GaussianNaturalParams& params);

/// theta in the coordinates paired with FeatureMap::gaussian_quadratic:
/// [eta1, eta2_ii on the diagonal slots, 2 eta2_ij on off-diagonal slots].
VectorXd gaussian_theta(const GaussianNaturalParams& params);
GaussianNaturalParams gaussian_from_theta(const VectorXd& theta, int dim);

/// n exact draws from N(mean, cov) using the lower Cholesky factor of cov.
ParticleSet sample_gaussian(const VectorXd& mean, const MatrixXd& cov, Index n,
                            std::uint64_t seed);

inline constexpr int kMaxStepHalvings = 10;

/// One natural-gradient step on the Gaussian family toward the targets.
/// The model's mean statistics and Fisher matrix are Monte Carlo estimates
/// from `mc_samples` draws seeded with `seed`. The step is halved (at most
/// ten times) until -2 eta2 stays positive definite.
GaussianNaturalParams exact_ngd_step(const GaussianNaturalParams& params,
                                     const ParticleSet& targets, double step, int mc_samples,
                                     std::uint64_t seed, double jitter = 1e-9);

}  // namespace kingflow
