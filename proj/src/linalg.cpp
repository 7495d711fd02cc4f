#include "kingflow/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kingflow {

namespace {

bool try_cholesky(const MatrixXd& m, MatrixXd& lower) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Index i = 0; i < lower.rows(); ++i) {
    const double p = lower(i, i);
    if (!(p > 0.0) || !std::isfinite(p)) return false;
  }
  return true;
}

void tree_sum(const MatrixXd& rows, Index begin, Index end, Eigen::Ref<VectorXd> acc) {
  constexpr Index kLeaf = 8;
  if (end - begin <= kLeaf) {
    for (Index i = begin; i < end; ++i) acc += rows.row(i).transpose();
    return;
  }
  const Index mid = begin + (end - begin) / 2;
  VectorXd left = VectorXd::Zero(rows.cols());
  VectorXd right = VectorXd::Zero(rows.cols());
  tree_sum(rows, begin, mid, left);
  tree_sum(rows, mid, end, right);
  acc += left + right;
}

}  // namespace

VectorXd SpdFactor::solve(const VectorXd& rhs) const {
  const auto l = lower.triangularView<Eigen::Lower>();
  VectorXd y = l.solve(rhs);
  return l.transpose().solve(y);
}

MatrixXd SpdFactor::solve(const MatrixXd& rhs) const {
  const auto l = lower.triangularView<Eigen::Lower>();
  MatrixXd y = l.solve(rhs);
  return l.transpose().solve(y);
}

MatrixXd SpdFactor::inverse() const {
  return solve(MatrixXd(MatrixXd::Identity(matrix.rows(), matrix.cols())));
}

SpdFactor factorize_spd(const MatrixXd& raw, double jitter, const std::string& what,
                        double cap) {
  if (raw.rows() != raw.cols() || raw.rows() == 0)
    throw InvalidInput(what + ": matrix must be square and nonempty");
  if (!raw.allFinite()) throw SingularMatrix(what + ": matrix has non-finite entries");
  if (jitter < 0.0) throw InvalidInput(what + ": jitter must be nonnegative");

  const MatrixXd sym = 0.5 * (raw + raw.transpose());
  const double limit = std::max(cap, jitter);
  const Index n = sym.rows();
  SpdFactor out;
  double current = jitter;
  while (true) {
    MatrixXd loaded = sym;
    loaded.diagonal().array() += current;
    if (try_cholesky(loaded, out.lower)) {
      out.matrix = std::move(loaded);
      out.jitter = current;
      return out;
    }
    const double next = current > 0.0 ? current * 10.0 : 1e-10;
    if (next > limit * (1.0 + 1e-12)) break;
    current = next;
  }
  std::ostringstream msg;
  msg << what << ": not positive definite (" << n << "x" << n
      << ") after jitter escalation to " << current;
  throw SingularMatrix(msg.str());
}

VectorXd pairwise_mean_rows(const MatrixXd& rows) {
  if (rows.rows() == 0) throw InvalidInput("mean of an empty set");
  VectorXd acc = VectorXd::Zero(rows.cols());
  tree_sum(rows, 0, rows.rows(), acc);
  return acc / static_cast<double>(rows.rows());
}

MatrixXd population_covariance(const MatrixXd& rows, const VectorXd& mean) {
  const MatrixXd centred = rows.rowwise() - mean.transpose();
  MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(rows.rows());
  return 0.5 * (cov + cov.transpose());
}

MatrixXd sym_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (m + m.transpose()));
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace kingflow
