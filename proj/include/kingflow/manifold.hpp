#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "kingflow/common.hpp"
#include "kingflow/linalg.hpp"

namespace kingflow {

struct TargetScore;
struct SteinSpec;

enum class FeatureKind { GaussianQuadratic, RbfFeatures, InformedPairwise, SteinFeatures, CustomLinear };

/// How Stein features pair test functions with coordinates.
///  RoundRobin: test function i uses coordinate i mod d (feature_dim = b).
///  Full: every test function with every coordinate (feature_dim = b * d),
///        ordered function-major.
enum class SteinPairing { RoundRobin, Full };

const char* to_string(FeatureKind kind);

/// Sufficient statistic T: R^d -> R^dT of an exponential family, together
/// with its analytic Jacobian.
///
/// Quadratic monomials are laid out as the row-major upper triangle of x x^T:
/// (x1^2, x1 x2, ..., x1 xd, x2^2, x2 x3, ..., xd^2). RBF features use
/// k(x, b) = exp(-|x - b|^2 / (2 sigma^2)).
class FeatureMap {
 public:
  static FeatureMap gaussian_quadratic(int dim);
  static FeatureMap rbf(MatrixXd centers, double bandwidth);
  static FeatureMap informed_pairwise(MatrixXd centers, double bandwidth,
                                      std::vector<std::pair<int, int>> pairs);
  static FeatureMap custom_linear(MatrixXd weight);
  /// With `constant_test`, d leading features use the test function f = 1,
  /// i.e. the score components themselves.
  static FeatureMap stein(FeatureMap base, TargetScore score,
                          SteinPairing pairing = SteinPairing::RoundRobin,
                          bool constant_test = false);

  FeatureKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int feature_dim() const { return feature_dim_; }

  const MatrixXd& centers() const { return centers_; }
  double bandwidth() const { return bandwidth_; }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
  const MatrixXd& weight() const { return weight_; }
  /// Only valid for SteinFeatures.
  const SteinSpec& stein_spec() const;

  VectorXd eval(const VectorXd& x) const;
  MatrixXd jacobian(const VectorXd& x) const;
  /// Hessian of feature `r`. Not available for SteinFeatures.
  MatrixXd hessian(const VectorXd& x, int r) const;

  /// eval() applied to every row; result is n x dT.
  MatrixXd eval_rows(const MatrixXd& points) const;
  std::vector<MatrixXd> jacobian_rows(const MatrixXd& points) const;

  void check_point(const VectorXd& x) const;

 private:
  FeatureMap() = default;

  FeatureKind kind_ = FeatureKind::CustomLinear;
  int input_dim_ = 0;
  int feature_dim_ = 0;
  MatrixXd centers_;
  double bandwidth_ = 1.0;
  std::vector<std::pair<int, int>> pairs_;
  MatrixXd weight_;
  std::shared_ptr<const SteinSpec> stein_;
};

/// Picks `count` distinct rows of `initial` uniformly at random (all rows if
/// there are fewer) and builds an RBF map whose bandwidth is the median
/// pairwise distance over `initial` and `targets`.
FeatureMap make_rbf_map(const ParticleSet& initial, const ParticleSet& targets, int count,
                        std::uint64_t seed);

/// Same center/bandwidth rule plus the given x_i x_j pair monomials.
FeatureMap make_informed_map(const ParticleSet& initial, const ParticleSet& targets, int count,
                             std::vector<std::pair<int, int>> pairs, std::uint64_t seed);

/// Mean-statistic estimate E[T(X)] over the particles.
VectorXd mean_features(const FeatureMap& map, const ParticleSet& points);

/// Empirical Fisher matrix Cov[T(X)] over the particles.
struct FisherMatrix {
  MatrixXd matrix;
  double jitter_applied = 0.0;
  MatrixXd factor;

  VectorXd solve(const VectorXd& rhs) const;
};

/// (1/n) sum (T_i - mu)(T_i - mu)^T + jitter I. If the Cholesky factorization
/// fails the jitter is raised tenfold up to 1e-2 before giving up.
FisherMatrix fisher_estimate(const FeatureMap& map, const ParticleSet& points, double jitter);

/// Converts a relative jitter into an absolute one using trace(cov)/dT, so
/// conditioning does not depend on the scale of T.
double scaled_jitter(const MatrixXd& raw_cov, double relative);

/// Same as fisher_estimate but `relative_jitter` is scaled by trace/dT first.
FisherMatrix fisher_estimate_scaled(const FeatureMap& map, const ParticleSet& points,
                                    double relative_jitter);

}  // namespace kingflow
