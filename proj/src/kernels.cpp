#include "kingflow/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kingflow {

namespace {

void check_pair(const VectorXd& x, const VectorXd& y) {
  if (x.size() != y.size()) throw InvalidInput("kernel: point dimensions differ");
}

double rbf(double sigma, const VectorXd& x, const VectorXd& y) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
}

}  // namespace

NtkSpec::NtkSpec(int input_dim, int hidden_width, std::uint64_t seed)
    : input_dim_(input_dim), hidden_width_(hidden_width), seed_(seed) {
  if (input_dim < 1 || hidden_width < 1) throw InvalidInput("NtkSpec: dimensions must be >= 1");
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_width));
  w1_ = s1 * standard_normal(rng, hidden_width, input_dim);
  b1_ = s1 * standard_normal(rng, hidden_width, 1);
  w2_ = s2 * standard_normal(rng, input_dim, hidden_width);
  b2_ = s2 * standard_normal(rng, input_dim, 1);
}

void NtkSpec::activations(const VectorXd& x, VectorXd& act, VectorXd& slope) const {
  if (x.size() != input_dim_) throw InvalidInput("NtkSpec: input dimension mismatch");
  act = (w1_ * x + b1_).array().tanh();
  slope = 1.0 - act.array().square();
}

VectorXd NtkSpec::forward(const VectorXd& x) const {
  VectorXd act, slope;
  activations(x, act, slope);
  return w2_ * act + b2_;
}

Index NtkSpec::parameter_count() const {
  const Index h = hidden_width_, d = input_dim_;
  return h * d + h + d * h + d;
}

const char* to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::RbfScalar: return "rbf";
    case KernelKind::DiagonalizedScalar: return "diagonalized";
    case KernelKind::EmpiricalNtk: return "ntk";
  }
  return "unknown";
}

KernelSpec KernelSpec::rbf(double bandwidth) {
  if (!(bandwidth > 0.0)) throw InvalidInput("kernel bandwidth must be positive");
  return KernelSpec{KernelKind::RbfScalar, bandwidth, std::nullopt};
}

KernelSpec KernelSpec::diagonalized(double bandwidth) {
  if (!(bandwidth > 0.0)) throw InvalidInput("kernel bandwidth must be positive");
  return KernelSpec{KernelKind::DiagonalizedScalar, bandwidth, std::nullopt};
}

KernelSpec KernelSpec::empirical_ntk(NtkSpec spec) {
  return KernelSpec{KernelKind::EmpiricalNtk, 1.0, std::move(spec)};
}

double kernel_value(const KernelSpec& spec, const VectorXd& x, const VectorXd& y) {
  check_pair(x, y);
  if (spec.kind == KernelKind::EmpiricalNtk)
    throw InvalidInput("kernel_value: the NTK is matrix valued, use ntk_value");
  return rbf(spec.bandwidth, x, y);
}

MatrixXd kernel_cross_grad(const KernelSpec& spec, const VectorXd& x, const VectorXd& y) {
  check_pair(x, y);
  if (spec.kind != KernelKind::RbfScalar)
    throw InvalidInput("kernel_cross_grad: only defined for the RBF scalar kernel");
  const double s2 = spec.bandwidth * spec.bandwidth;
  const VectorXd diff = x - y;
  const double k = rbf(spec.bandwidth, x, y);
  MatrixXd out = -diff * diff.transpose() / (s2 * s2);
  out.diagonal().array() += 1.0 / s2;
  return k * out;
}

MatrixXd ntk_value(const NtkSpec& spec, const VectorXd& x, const VectorXd& y) {
  check_pair(x, y);
  VectorXd ax, sx, ay, sy;
  spec.activations(x, ax, sx);
  spec.activations(y, ay, sy);
  const VectorXd weights = sx.cwiseProduct(sy);
  MatrixXd out = (x.dot(y) + 1.0) * (spec.w2() * weights.asDiagonal() * spec.w2().transpose());
  out.diagonal().array() += ax.dot(ay) + 1.0;
  return out;
}

MatrixXd drift_kernel(const KernelSpec& spec, const VectorXd& x, const VectorXd& y) {
  switch (spec.kind) {
    case KernelKind::RbfScalar:
      return kernel_cross_grad(spec, x, y);
    case KernelKind::DiagonalizedScalar: {
      check_pair(x, y);
      return rbf(spec.bandwidth, x, y) * MatrixXd::Identity(x.size(), x.size());
    }
    case KernelKind::EmpiricalNtk:
      if (!spec.ntk) throw InvalidInput("drift_kernel: NTK kernel without network");
      return ntk_value(*spec.ntk, x, y);
  }
  throw InvalidInput("drift_kernel: unknown kernel kind");
}

double median_heuristic(const MatrixXd& points) {
  const Index n = points.rows();
  if (n < 2) throw InvalidInput("median_heuristic: need at least two points");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) dist.push_back((points.row(i) - points.row(j)).norm());

  const std::size_t m = dist.size();
  const std::size_t mid = m / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (m % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (median > 0.0) return median;

  double smallest = std::numeric_limits<double>::infinity();
  for (double v : dist)
    if (v > 0.0) smallest = std::min(smallest, v);
  return std::isfinite(smallest) ? smallest : 1.0;
}

double median_heuristic(const ParticleSet& a, const ParticleSet& b) {
  if (!a.empty() && !b.empty() && a.dim() != b.dim())
    throw InvalidInput("median_heuristic: point dimensions differ");
  MatrixXd all(a.size() + b.size(), a.empty() ? b.dim() : a.dim());
  if (!a.empty()) all.topRows(a.size()) = a.points;
  if (!b.empty()) all.bottomRows(b.size()) = b.points;
  return median_heuristic(all);
}

}  // namespace kingflow
