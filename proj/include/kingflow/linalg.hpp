#pragma once

#include "kingflow/common.hpp"

namespace kingflow {

/// Symmetric positive definite matrix together with its Cholesky factor.
/// `jitter` is the diagonal loading that was needed for the factorization to
/// succeed.
struct SpdFactor {
  MatrixXd matrix;
  MatrixXd lower;
  double jitter = 0.0;

  VectorXd solve(const VectorXd& rhs) const;
  MatrixXd solve(const MatrixXd& rhs) const;
  MatrixXd inverse() const;
};

inline constexpr double kJitterCap = 1e-2;

/// Adds `jitter * I` to `raw` and factorizes. On failure the jitter is raised
/// tenfold until it exceeds `max(cap, jitter)`; then SingularMatrix is thrown
/// with `what` in the message.
SpdFactor factorize_spd(const MatrixXd& raw, double jitter, const std::string& what,
                        double cap = kJitterCap);

/// Column means of `rows` summed with a fixed pairwise tree, so the result
/// does not depend on how a caller might split the work.
VectorXd pairwise_mean_rows(const MatrixXd& rows);

/// (1/n) sum (r_i - mu)(r_i - mu)^T, exactly symmetric.
MatrixXd population_covariance(const MatrixXd& rows, const VectorXd& mean);

/// Principal square root of a symmetric PSD matrix via eigendecomposition,
/// negative eigenvalues clamped to zero.
MatrixXd sym_sqrt(const MatrixXd& m);

}  // namespace kingflow
