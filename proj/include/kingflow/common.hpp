#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace kingflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the caller's input was violated (dimension mismatch,
/// empty set, bad parameter).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A covariance-like matrix could not be factorized even at the jitter cap.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// Step halving in the exact parametric NGD update did not recover a valid
/// Gaussian.
class StepFailure : public Error {
 public:
  using Error::Error;
};

/// A particle coordinate became NaN or infinite during a flow.
class Divergence : public Error {
 public:
  Divergence(const std::string& what, int iteration)
      : Error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// n points in R^d (one per row) with an attached time.
struct ParticleSet {
  MatrixXd points;
  double t = 0.0;

  ParticleSet() = default;
  explicit ParticleSet(MatrixXd pts, double time = 0.0)
      : points(std::move(pts)), t(time) {}

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  bool empty() const { return points.rows() == 0; }
  VectorXd point(Index i) const { return points.row(i).transpose(); }
};

using Rng = std::mt19937_64;

/// n x d matrix of iid standard normal draws, filled row by row.
inline MatrixXd standard_normal(Rng& rng, Index n, Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd out(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) out(i, j) = normal(rng);
  return out;
}

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

}  // namespace kingflow
