#pragma once

#include <utility>
#include <vector>

#include "kingflow/common.hpp"

namespace kingflow {

/// Mixture of unit-covariance Gaussians: a component is drawn first, then
/// the point.
ParticleSet gen_gaussian_mixture(int dim, const std::vector<VectorXd>& means,
                                 const std::vector<double>& weights, Index n, std::uint64_t seed);

/// 0.5 N(-offset 1, I) + 0.5 N(offset 1, I) in `dim` dimensions.
ParticleSet gen_bimodal(int dim, double offset, Index n, std::uint64_t seed);

/// Standard 3-d S-curve (sin u, sign(u)(cos u - 1), v), u ~ U[-3pi/2, 3pi/2],
/// v ~ U[0, 2], plus isotropic Gaussian noise.
ParticleSet gen_scurve(Index n, double noise_sd, std::uint64_t seed);

/// Random-graph Gaussian graphical model N(0, Theta^{-1}).
struct GgmSpec {
  int dim = 30;
  double edge_prob = 0.05;
  double edge_value = 0.3;
  std::uint64_t seed = 0;
  MatrixXd precision;
  std::vector<std::pair<int, int>> edges;

  /// Samples the graph and sets `precision`: unit diagonal, edge_value on
  /// sampled edges, diagonal raised in steps of 0.1 until PD.
  static GgmSpec make(int dim, double edge_prob, double edge_value, std::uint64_t seed);
};

ParticleSet gen_ggm_samples(const GgmSpec& spec, Index n, std::uint64_t seed);

/// Rotates the first two coordinates clockwise by `degrees`; a negative
/// angle rotates counter-clockwise, so (1, 0) at -90 degrees becomes (0, 1).
ParticleSet rotate_dataset(const ParticleSet& points, double degrees);

/// Off-diagonal support of the inverse of the (jittered) sample covariance:
/// entry (i, j) is true when |Theta_hat(i, j)| > threshold.
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> precision_support(const ParticleSet& points,
                                                                      double threshold);

/// Fraction of the given edges marked in `support` (1 when there are none).
double edge_recall(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& support,
                   const std::vector<std::pair<int, int>>& edges);

}  // namespace kingflow
