#include "kingflow/projection.hpp"

#include <cmath>
#include <numbers>

namespace kingflow {

double TimeKernel::value(double t) const {
  const double z = (t - center) / sigma;
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
}

double TimeKernel::deriv(double t) const { return -((t - center) / (sigma * sigma)) * value(t); }

std::vector<double> uniform_time_grid(const TimeKernel& tk, int nodes, double half_width) {
  if (nodes < 2) throw InvalidInput("uniform_time_grid: need at least two nodes");
  std::vector<double> grid(static_cast<std::size_t>(nodes));
  const double lo = tk.center - half_width * tk.sigma;
  const double span = 2.0 * half_width * tk.sigma;
  for (int i = 0; i < nodes; ++i)
    grid[static_cast<std::size_t>(i)] = lo + span * static_cast<double>(i) / (nodes - 1);
  return grid;
}

double trapezoid(const std::vector<double>& grid, const std::function<double(double)>& f) {
  double acc = 0.0;
  double prev = f(grid.front());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = f(grid[i]);
    acc += 0.5 * (grid[i] - grid[i - 1]) * (prev + cur);
    prev = cur;
  }
  return acc;
}

ProjectionResult project_delta_quadrature(const FeatureMap& map, const Trajectory& trajectory,
                                          const TimeKernel& tk, const std::vector<double>& grid,
                                          double jitter) {
  if (!(tk.sigma > 0.0)) throw InvalidInput("project_delta_quadrature: sigma must be positive");
  if (grid.size() < 41) throw InvalidInput("project_delta_quadrature: need at least 41 nodes");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InvalidInput("project_delta_quadrature: grid not increasing");
  const double reach = 5.0 * tk.sigma * (1.0 - 1e-9);
  if (grid.front() > tk.center - reach || grid.back() < tk.center + reach)
    throw InvalidInput("project_delta_quadrature: grid must span t0 +/- 5 sigma");

  const Index dt = map.feature_dim();
  MatrixXd cov_integral = MatrixXd::Zero(dt, dt);
  VectorXd mean_integral = VectorXd::Zero(dt);
  MatrixXd prev_cov;
  VectorXd prev_mean;
  double prev_t = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    const ParticleSet xs = trajectory(t);
    if (xs.size() < 2) throw InvalidInput("project_delta_quadrature: trajectory returned < 2 points");
    const MatrixXd feats = map.eval_rows(xs.points);
    const VectorXd mean = pairwise_mean_rows(feats);
    MatrixXd cov = tk.value(t) * population_covariance(feats, mean);
    VectorXd weighted = tk.deriv(t) * mean;
    if (i > 0) {
      const double h = 0.5 * (t - prev_t);
      cov_integral += h * (prev_cov + cov);
      mean_integral += h * (prev_mean + weighted);
    }
    prev_cov = std::move(cov);
    prev_mean = std::move(weighted);
    prev_t = t;
  }

  SpdFactor f = factorize_spd(cov_integral, jitter, "project_delta_quadrature");
  ProjectionResult out;
  out.delta = -f.solve(mean_integral);
  out.fisher_used = FisherMatrix{std::move(f.matrix), f.jitter, std::move(f.lower)};
  return out;
}

VectorXd projected_change(const FeatureMap& map, const ParticleSet& particles,
                          const MatrixXd& velocities) {
  if (velocities.rows() != particles.size() || velocities.cols() != particles.dim())
    throw InvalidInput("projected_change: velocities must be n x d");
  if (particles.empty()) throw InvalidInput("projected_change: no particles");
  MatrixXd rows(particles.size(), map.feature_dim());
  for (Index i = 0; i < particles.size(); ++i)
    rows.row(i) = (map.jacobian(particles.point(i)) * velocities.row(i).transpose()).transpose();
  return pairwise_mean_rows(rows);
}

ProjectionResult project_delta_limit(const FeatureMap& map, const ParticleSet& particles,
                                     const MatrixXd& velocities, double jitter) {
  const VectorXd change = projected_change(map, particles, velocities);
  ProjectionResult out;
  out.fisher_used = fisher_estimate(map, particles, jitter);
  out.delta = out.fisher_used.solve(change);
  return out;
}

double alignment_residual(const NatGradResult& ngd, const ProjectionResult& proj,
                          AlignmentMode mode) {
  if (ngd.gap.size() != proj.delta.size())
    throw InvalidInput("alignment_residual: dimension mismatch");
  if (mode == AlignmentMode::Euclidean) return (ngd.natural_direction - proj.delta).squaredNorm();
  const VectorXd diff = ngd.gap - proj.fisher_used.matrix * proj.delta;
  return std::max(0.0, diff.dot(proj.fisher_used.solve(diff)));
}

}  // namespace kingflow
