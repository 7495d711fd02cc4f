#pragma once

#include <functional>
#include <vector>

#include "kingflow/common.hpp"
#include "kingflow/manifold.hpp"
#include "kingflow/ngd.hpp"

namespace kingflow {

/// Normalized Gaussian smoothing kernel in time centred on t0.
struct TimeKernel {
  double center = 0.0;
  double sigma = 0.1;

  double value(double t) const;
  /// d/dt value(t) = -((t - t0) / sigma^2) value(t).
  double deriv(double t) const;
};

inline double time_kernel_deriv(const TimeKernel& tk, double t) { return tk.deriv(t); }

/// Uniform grid over [t0 - half_width * sigma, t0 + half_width * sigma].
std::vector<double> uniform_time_grid(const TimeKernel& tk, int nodes = 81, double half_width = 5.0);

/// Trapezoidal rule over an arbitrary increasing grid.
double trapezoid(const std::vector<double>& grid, const std::function<double(double)>& f);

struct ProjectionResult {
  VectorXd delta;
  FisherMatrix fisher_used;
  double residual = 0.0;
};

using Trajectory = std::function<ParticleSet(double)>;

/// Projection of a sampled trajectory's change onto M(T) by time-smoothed
/// score matching:
///   delta = -(int lambda Cov[T(X_t)] dt)^{-1} int d_t lambda E[T(X_t)] dt,
/// both integrals by the trapezoidal rule on `grid`.
ProjectionResult project_delta_quadrature(const FeatureMap& map, const Trajectory& trajectory,
                                          const TimeKernel& tk, const std::vector<double>& grid,
                                          double jitter = 0.0);

/// sigma -> 0 limit for a drift model X_t = X_t0 + (t - t0) h(X_t0):
///   delta = F^{-1} (1/n) sum_i J_T(x_i) h_i.
ProjectionResult project_delta_limit(const FeatureMap& map, const ParticleSet& particles,
                                     const MatrixXd& velocities, double jitter);

/// (1/n) sum_i J_T(x_i) h_i, the un-preconditioned projected change.
VectorXd projected_change(const FeatureMap& map, const ParticleSet& particles,
                          const MatrixXd& velocities);

enum class AlignmentMode { Euclidean, FisherMetric };

/// Euclidean:    |natural_direction - delta|^2
/// FisherMetric: (gap - F delta)^T F^{-1} (gap - F delta), F = proj.fisher_used
double alignment_residual(const NatGradResult& ngd, const ProjectionResult& proj,
                          AlignmentMode mode);

}  // namespace kingflow
