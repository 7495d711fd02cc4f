#pragma once

#include <memory>

#include "kingflow/common.hpp"
#include "kingflow/manifold.hpp"
#include "kingflow/ngd.hpp"

namespace kingflow {

/// Closed-form score function grad log p of a built-in target density.
///
/// DiagonalGaussian: N(mean, diag(variance)).
/// SymmetricMixture: 0.5 N(-mean, diag(variance)) + 0.5 N(mean, diag(variance)).
struct TargetScore {
  enum class Kind { DiagonalGaussian, SymmetricMixture };

  Kind kind = Kind::DiagonalGaussian;
  VectorXd mean;
  VectorXd variance;

  static TargetScore diagonal_gaussian(VectorXd mean, VectorXd variance);
  static TargetScore symmetric_mixture(VectorXd offset, VectorXd variance);

  int dim() const { return static_cast<int>(mean.size()); }
  VectorXd score(const VectorXd& x) const;
  /// Hessian of log p.
  MatrixXd score_jacobian(const VectorXd& x) const;
  /// Exact draws from p.
  ParticleSet sample(Index n, std::uint64_t seed) const;
};

struct SteinSpec {
  std::shared_ptr<const FeatureMap> base;
  TargetScore score;
  SteinPairing pairing = SteinPairing::RoundRobin;
  bool constant_test = false;

  /// Number of leading score-only features (d with constant_test, else 0).
  int leading() const;
  int feature_dim() const;
  /// Coordinate and base test function of a non-leading feature.
  int coordinate(int feature) const;
  int base_index(int feature) const;
};

/// S_p f: component i is  d_c log p(x) f_j(x) + d_c f_j(x)  with (j, c) the
/// test function and coordinate assigned to feature i.
VectorXd stein_features(const SteinSpec& spec, const VectorXd& x);
MatrixXd stein_jacobian(const SteinSpec& spec, const VectorXd& x);

/// Natural gradient of KL[p, q] on the Stein family. E_p[T] = 0, so the gap
/// is minus the particle mean of the Stein features.
NatGradResult stein_natural_gradient(const FeatureMap& map, const ParticleSet& particles,
                                     double jitter);

}  // namespace kingflow
