#pragma once

#include <optional>

#include "kingflow/common.hpp"

namespace kingflow {

/// One-hidden-layer tanh network phi(x) = W2 tanh(W1 x + b1) + b2 with
/// frozen weights drawn from N(0, 1/fan_in). Its empirical tangent kernel is
/// the d x d Gram of parameter Jacobians.
class NtkSpec {
 public:
  NtkSpec() = default;
  NtkSpec(int input_dim, int hidden_width, std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  int hidden_width() const { return hidden_width_; }
  std::uint64_t seed() const { return seed_; }

  const MatrixXd& w1() const { return w1_; }
  const VectorXd& b1() const { return b1_; }
  const MatrixXd& w2() const { return w2_; }
  const VectorXd& b2() const { return b2_; }

  VectorXd forward(const VectorXd& x) const;
  /// tanh activations and their derivatives at the pre-activation.
  void activations(const VectorXd& x, VectorXd& act, VectorXd& slope) const;

  /// Flat parameter count: H d + H + d H + d.
  Index parameter_count() const;

 private:
  int input_dim_ = 0;
  int hidden_width_ = 0;
  std::uint64_t seed_ = 0;
  MatrixXd w1_;
  VectorXd b1_;
  MatrixXd w2_;
  VectorXd b2_;
};

inline constexpr int kDefaultNtkWidth = 64;

enum class KernelKind { RbfScalar, DiagonalizedScalar, EmpiricalNtk };

const char* to_string(KernelKind kind);

struct KernelSpec {
  KernelKind kind = KernelKind::RbfScalar;
  double bandwidth = 1.0;
  std::optional<NtkSpec> ntk;

  static KernelSpec rbf(double bandwidth);
  static KernelSpec diagonalized(double bandwidth);
  static KernelSpec empirical_ntk(NtkSpec spec);
};

/// exp(-|x - y|^2 / (2 sigma^2)) for the scalar kinds.
double kernel_value(const KernelSpec& spec, const VectorXd& x, const VectorXd& y);

/// grad_x grad_y k(x, y): entry (a, b) is d^2 k / dx_a dy_b. RbfScalar only.
MatrixXd kernel_cross_grad(const KernelSpec& spec, const VectorXd& x, const VectorXd& y);

/// K(x, y) = J_beta phi(x) J_beta phi(y)^T in closed form.
MatrixXd ntk_value(const NtkSpec& spec, const VectorXd& x, const VectorXd& y);

/// Matrix-valued kernel used inside the drift solve: grad grad k for
/// RbfScalar, k I for DiagonalizedScalar, the NTK for EmpiricalNtk.
MatrixXd drift_kernel(const KernelSpec& spec, const VectorXd& x, const VectorXd& y);

/// Median of pairwise distances over the union of both sets (unordered pairs
/// of distinct indices). Falls back to the smallest nonzero distance when the
/// median is zero and to 1 when every distance is zero.
double median_heuristic(const ParticleSet& a, const ParticleSet& b);
double median_heuristic(const MatrixXd& points);

}  // namespace kingflow
