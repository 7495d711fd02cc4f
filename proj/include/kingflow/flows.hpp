#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "kingflow/common.hpp"
#include "kingflow/kernels.hpp"
#include "kingflow/linalg.hpp"
#include "kingflow/manifold.hpp"

namespace kingflow {

/// Matrix-valued kernel K(x, y) (d x d) used to build a drift field.
using MatrixKernel = std::function<MatrixXd(const VectorXd&, const VectorXd&)>;

/// The solved dual system of a kernel drift. The weight-space solution is
/// never formed; `coeff` = Gamma^{-1} g stands in for it, and the field is
///   h(x) = (1/n) sum_i K(x_i, x)^T J_i^T coeff.
struct DriftSolution {
  SpdFactor gamma;
  VectorXd coeff;
  VectorXd gap;
  FisherMatrix fisher;
  ParticleSet anchors;
  std::vector<MatrixXd> jacobians;
  /// Row i is J_i^T coeff.
  MatrixXd anchor_directions;
  /// kernel_blocks(anchors, anchors), reused when the drift is evaluated at
  /// the anchors themselves.
  MatrixXd anchor_blocks;
  double ridge = 0.0;
  KernelSpec kernel;
  /// Set when the solve used a caller-supplied kernel instead of `kernel`.
  MatrixKernel custom_kernel;
};

/// Stacked kernel blocks: entry block (i, j) is K(a_i, b_j), size (n d) x (m d).
MatrixXd kernel_blocks(const KernelSpec& spec, const MatrixXd& a, const MatrixXd& b);
MatrixXd kernel_blocks(const MatrixKernel& kernel, const MatrixXd& a, const MatrixXd& b);

/// Gamma = ridge F + (1/n^2) sum_ij J_i K(x_i, x_j) J_j^T and coeff = Gamma^{-1} gap.
/// `jitter` is relative (scaled by trace/dT) for both F and Gamma.
DriftSolution solve_drift(const FeatureMap& map, const KernelSpec& kernel,
                          const ParticleSet& particles, const VectorXd& gap, double ridge,
                          double jitter);
DriftSolution solve_drift(const FeatureMap& map, const MatrixKernel& kernel,
                          const ParticleSet& particles, const VectorXd& gap, double ridge,
                          double jitter);

/// Kernel drift with the RBF cross-gradient kernel; gap = mean_T(targets) - mean_T(particles).
DriftSolution solve_king_drift(const FeatureMap& map, const KernelSpec& kernel,
                               const ParticleSet& particles, const ParticleSet& targets,
                               double ridge, double jitter);

/// Same with an empirical NTK or a diagonalized scalar kernel.
DriftSolution solve_ntking_drift(const FeatureMap& map, const KernelSpec& kernel,
                                 const ParticleSet& particles, const ParticleSet& targets,
                                 double ridge, double jitter);

/// Drift evaluated at each query row, m x d.
MatrixXd eval_drift(const DriftSolution& sol, const ParticleSet& query);

/// grad log p - grad log q with both scores from Gaussian KDEs.
MatrixXd wgf_velocity(const ParticleSet& targets, const ParticleSet& particles,
                      double bandwidth_p, double bandwidth_q);

/// Gradient of the score of a Gaussian KDE over `centers` evaluated at `points`.
MatrixXd kde_score(const MatrixXd& centers, double bandwidth, const MatrixXd& points);

/// MMD flow (energy distance) velocity; coincident points contribute zero.
MatrixXd mmd_flow_velocity(const ParticleSet& targets, const ParticleSet& particles);

enum class FlowMethod { King, NtKing, Wgf, MmdFlow };

const char* to_string(FlowMethod method);
FlowMethod flow_method_from_string(const std::string& name);

struct FlowConfig {
  double step = 1.0;
  int iterations = 100;
  double ridge = 1e-3;
  /// Relative Fisher/Gamma jitter.
  double jitter = 1e-6;
  int log_every = 10;
  std::uint64_t seed = 0;
  /// Keep the kernel bandwidth from iteration 0 instead of re-running the
  /// median heuristic each step.
  bool freeze_bandwidth = false;

  void validate() const;
};

struct FlowDiagnostics {
  double drift_norm = 0.0;
  double bandwidth = 0.0;
  std::optional<double> mmd;
  std::optional<double> residual;
};

struct FlowSnapshot {
  int iteration;
  double t;
  const ParticleSet& particles;
  FlowDiagnostics diagnostics;
};

using FlowObserver = std::function<void(const FlowSnapshot&)>;
using MetricsProvider = std::function<double(const ParticleSet&)>;

/// Forward-Euler particle flow X <- X + step * v(X), with the velocity field
/// recomputed at every iteration. For Stein feature maps the targets may be
/// empty; the gap then comes from the Stein identity.
///
/// The observer sees iteration 0 and every `log_every`-th iteration plus the
/// last one. Throws Divergence if a coordinate becomes non-finite.
ParticleSet run_flow(FlowMethod method, const FeatureMap& map, const KernelSpec& kernel,
                     const ParticleSet& targets, const ParticleSet& init, const FlowConfig& cfg,
                     const FlowObserver& observer = {}, const MetricsProvider& metrics = {});

}  // namespace kingflow
