#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <cmath>
#include <functional>

#include "kingflow/flows.hpp"
#include "kingflow/kernels.hpp"
#include "kingflow/manifold.hpp"

namespace kftest {

using kingflow::Index;
using kingflow::MatrixXd;
using kingflow::VectorXd;

inline double rel_err(const MatrixXd& got, const MatrixXd& want) {
  const double scale = std::max(want.norm(), 1e-300);
  return (got - want).norm() / scale;
}

/// Central differences of a vector function, rows = outputs.
inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x,
                            double h = 1e-5) {
  const VectorXd f0 = f(x);
  MatrixXd j(f0.size(), x.size());
  for (Index c = 0; c < x.size(); ++c) {
    VectorXd up = x, dn = x;
    up(c) += h;
    dn(c) -= h;
    j.col(c) = (f(up) - f(dn)) / (2.0 * h);
  }
  return j;
}

/// Explicit 5-feature map psi(x) = [x1, x2, x1^2, x1 x2, x2^2] on R^2 and its
/// Jacobian (5 x 2); k(x, y) = psi(x) . psi(y).
inline VectorXd psi(const VectorXd& x) {
  VectorXd p(5);
  p << x(0), x(1), x(0) * x(0), x(0) * x(1), x(1) * x(1);
  return p;
}

inline MatrixXd psi_jacobian(const VectorXd& x) {
  MatrixXd j(5, 2);
  j << 1, 0, 0, 1, 2 * x(0), 0, x(1), x(0), 0, 2 * x(1);
  return j;
}

/// grad_x grad_y k(x, y) for k = psi . psi.
inline MatrixXd psi_cross_grad(const VectorXd& x, const VectorXd& y) {
  return psi_jacobian(x).transpose() * psi_jacobian(y);
}

/// Direct weight-space ridge solve: h(x) = J_psi(x)^T w with
///   w = (B^T F^{-1} B + ridge I)^{-1} B^T F^{-1} gap,  B = (1/n) sum_i J_T(x_i) J_psi(x_i)^T.
inline MatrixXd primal_drift(const kingflow::FeatureMap& map, const MatrixXd& particles,
                             const MatrixXd& fisher, const VectorXd& gap, double ridge,
                             const MatrixXd& query) {
  const Index n = particles.rows();
  MatrixXd b = MatrixXd::Zero(map.feature_dim(), 5);
  for (Index i = 0; i < n; ++i) {
    const VectorXd x = particles.row(i).transpose();
    b += map.jacobian(x) * psi_jacobian(x).transpose();
  }
  b /= static_cast<double>(n);
  const MatrixXd finv_b = fisher.ldlt().solve(b);
  const MatrixXd lhs = b.transpose() * finv_b + ridge * MatrixXd::Identity(5, 5);
  const VectorXd w = lhs.ldlt().solve(finv_b.transpose() * gap);
  MatrixXd out(query.rows(), query.cols());
  for (Index i = 0; i < query.rows(); ++i) {
    const VectorXd x = query.row(i).transpose();
    out.row(i) = (psi_jacobian(x).transpose() * w).transpose();
  }
  return out;
}

/// Re-implementation of the tanh network with an explicit flat parameter
/// vector [W1 (row-major), b1, W2 (row-major), b2].
struct FlatNet {
  int d, h;
  VectorXd theta;

  explicit FlatNet(const kingflow::NtkSpec& spec)
      : d(spec.input_dim()), h(spec.hidden_width()), theta(spec.parameter_count()) {
    Index k = 0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < d; ++c) theta(k++) = spec.w1()(r, c);
    for (int r = 0; r < h; ++r) theta(k++) = spec.b1()(r);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < h; ++c) theta(k++) = spec.w2()(r, c);
    for (int r = 0; r < d; ++r) theta(k++) = spec.b2()(r);
  }

  VectorXd forward(const VectorXd& p, const VectorXd& x) const {
    Index k = 0;
    VectorXd hidden(h);
    for (int r = 0; r < h; ++r) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c) acc += p(k++) * x(c);
      hidden(r) = acc;
    }
    for (int r = 0; r < h; ++r) hidden(r) = std::tanh(hidden(r) + p(k++));
    VectorXd out(d);
    for (int r = 0; r < d; ++r) {
      double acc = 0.0;
      for (int c = 0; c < h; ++c) acc += p(k++) * hidden(c);
      out(r) = acc;
    }
    for (int r = 0; r < d; ++r) out(r) += p(k++);
    return out;
  }

  /// d x P parameter Jacobian by central differences.
  MatrixXd param_jacobian(const VectorXd& x, double step = 1e-6) const {
    return fd_jacobian([&](const VectorXd& p) { return forward(p, x); }, theta, step);
  }
};

inline MatrixXd fd_ntk(const kingflow::NtkSpec& spec, const VectorXd& x, const VectorXd& y) {
  const FlatNet net(spec);
  return net.param_jacobian(x) * net.param_jacobian(y).transpose();
}

inline double min_eigen(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace kftest
