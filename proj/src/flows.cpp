#include "kingflow/flows.hpp"

#include <cmath>
#include <sstream>

#include "kingflow/stein.hpp"

namespace kingflow {

namespace {

MatrixXd rbf_cross_blocks(double sigma, const MatrixXd& a, const MatrixXd& b) {
  const Index n = a.rows(), m = b.rows(), d = a.cols();
  const double s2 = sigma * sigma;
  MatrixXd out(n * d, m * d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const VectorXd diff = (a.row(i) - b.row(j)).transpose();
      const double k = std::exp(-diff.squaredNorm() / (2.0 * s2));
      auto blk = out.block(i * d, j * d, d, d);
      blk.noalias() = (-k / (s2 * s2)) * diff * diff.transpose();
      blk.diagonal().array() += k / s2;
    }
  }
  return out;
}

MatrixXd diagonal_blocks(double sigma, const MatrixXd& a, const MatrixXd& b) {
  const Index n = a.rows(), m = b.rows(), d = a.cols();
  MatrixXd out = MatrixXd::Zero(n * d, m * d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const double k = std::exp(-(a.row(i) - b.row(j)).squaredNorm() / (2.0 * sigma * sigma));
      out.block(i * d, j * d, d, d).diagonal().setConstant(k);
    }
  }
  return out;
}

MatrixXd ntk_blocks(const NtkSpec& net, const MatrixXd& a, const MatrixXd& b) {
  const Index n = a.rows(), m = b.rows(), d = a.cols();
  const Index h = net.hidden_width();
  MatrixXd act_a(n, h), slope_a(n, h), act_b(m, h), slope_b(m, h);
  VectorXd act, slope;
  for (Index i = 0; i < n; ++i) {
    net.activations(a.row(i).transpose(), act, slope);
    act_a.row(i) = act.transpose();
    slope_a.row(i) = slope.transpose();
  }
  for (Index j = 0; j < m; ++j) {
    net.activations(b.row(j).transpose(), act, slope);
    act_b.row(j) = act.transpose();
    slope_b.row(j) = slope.transpose();
  }
  const MatrixXd act_gram = act_a * act_b.transpose();
  const MatrixXd input_gram = a * b.transpose();
  const MatrixXd& w2 = net.w2();
  MatrixXd out(n * d, m * d);
  MatrixXd scaled(d, h);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      scaled = w2 * slope_a.row(i).cwiseProduct(slope_b.row(j)).asDiagonal();
      auto blk = out.block(i * d, j * d, d, d);
      blk.noalias() = (input_gram(i, j) + 1.0) * scaled * w2.transpose();
      blk.diagonal().array() += act_gram(i, j) + 1.0;
    }
  }
  return out;
}

// Jacobians side by side: [J_1 | J_2 | ... | J_n], dT x (n d).
MatrixXd concat_jacobians(const std::vector<MatrixXd>& jac, Index dt, Index d) {
  MatrixXd out(dt, static_cast<Index>(jac.size()) * d);
  for (std::size_t i = 0; i < jac.size(); ++i) out.middleCols(static_cast<Index>(i) * d, d) = jac[i];
  return out;
}

DriftSolution solve_from_blocks(const FeatureMap& map, const ParticleSet& particles,
                                const VectorXd& gap, double ridge, double jitter,
                                MatrixXd blocks) {
  if (particles.size() < 2) throw InvalidInput("solve_drift: need at least two particles");
  if (particles.dim() != map.input_dim()) throw InvalidInput("solve_drift: dimension mismatch");
  if (gap.size() != map.feature_dim()) throw InvalidInput("solve_drift: gap dimension mismatch");
  if (!(ridge > 0.0)) throw InvalidInput("solve_drift: ridge must be positive");

  const Index n = particles.size(), d = particles.dim(), dt = map.feature_dim();
  DriftSolution sol;
  sol.anchors = particles;
  sol.ridge = ridge;
  sol.gap = gap;
  sol.fisher = fisher_estimate_scaled(map, particles, jitter);
  sol.jacobians = map.jacobian_rows(particles.points);

  const MatrixXd jcat = concat_jacobians(sol.jacobians, dt, d);
  MatrixXd gamma = (jcat * blocks * jcat.transpose()) / static_cast<double>(n * n);
  gamma += ridge * sol.fisher.matrix;
  gamma = 0.5 * (gamma + gamma.transpose());
  sol.gamma = factorize_spd(gamma, scaled_jitter(gamma, jitter), "drift Gamma");
  sol.coeff = sol.gamma.solve(gap);

  sol.anchor_directions.resize(n, d);
  for (Index i = 0; i < n; ++i)
    sol.anchor_directions.row(i) = (sol.jacobians[static_cast<std::size_t>(i)].transpose() * sol.coeff).transpose();
  sol.anchor_blocks = std::move(blocks);
  return sol;
}

MatrixXd apply_blocks(const MatrixXd& blocks, const MatrixXd& directions, Index m) {
  const Index n = directions.rows(), d = directions.cols();
  VectorXd stacked(n * d);
  for (Index i = 0; i < n; ++i) stacked.segment(i * d, d) = directions.row(i).transpose();
  const VectorXd h = (blocks.transpose() * stacked) / static_cast<double>(n);
  MatrixXd out(m, d);
  for (Index j = 0; j < m; ++j) out.row(j) = h.segment(j * d, d).transpose();
  return out;
}

double rms(const MatrixXd& v) {
  return v.rows() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.rows()));
}

}  // namespace

MatrixXd kernel_blocks(const KernelSpec& spec, const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() != b.cols()) throw InvalidInput("kernel_blocks: dimension mismatch");
  switch (spec.kind) {
    case KernelKind::RbfScalar:
      return rbf_cross_blocks(spec.bandwidth, a, b);
    case KernelKind::DiagonalizedScalar:
      return diagonal_blocks(spec.bandwidth, a, b);
    case KernelKind::EmpiricalNtk:
      if (!spec.ntk) throw InvalidInput("kernel_blocks: NTK kernel without network");
      if (spec.ntk->input_dim() != a.cols()) throw InvalidInput("kernel_blocks: NTK input dimension mismatch");
      return ntk_blocks(*spec.ntk, a, b);
  }
  throw InvalidInput("kernel_blocks: unknown kernel kind");
}

MatrixXd kernel_blocks(const MatrixKernel& kernel, const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() != b.cols()) throw InvalidInput("kernel_blocks: dimension mismatch");
  const Index n = a.rows(), m = b.rows(), d = a.cols();
  MatrixXd out(n * d, m * d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j)
      out.block(i * d, j * d, d, d) = kernel(a.row(i).transpose(), b.row(j).transpose());
  return out;
}

DriftSolution solve_drift(const FeatureMap& map, const KernelSpec& kernel,
                          const ParticleSet& particles, const VectorXd& gap, double ridge,
                          double jitter) {
  DriftSolution sol = solve_from_blocks(map, particles, gap, ridge, jitter,
                                        kernel_blocks(kernel, particles.points, particles.points));
  sol.kernel = kernel;
  return sol;
}

DriftSolution solve_drift(const FeatureMap& map, const MatrixKernel& kernel,
                          const ParticleSet& particles, const VectorXd& gap, double ridge,
                          double jitter) {
  DriftSolution sol = solve_from_blocks(map, particles, gap, ridge, jitter,
                                        kernel_blocks(kernel, particles.points, particles.points));
  sol.custom_kernel = kernel;
  return sol;
}

DriftSolution solve_king_drift(const FeatureMap& map, const KernelSpec& kernel,
                               const ParticleSet& particles, const ParticleSet& targets,
                               double ridge, double jitter) {
  if (kernel.kind != KernelKind::RbfScalar)
    throw InvalidInput("solve_king_drift: expects an RBF scalar kernel");
  if (targets.empty()) throw InvalidInput("solve_king_drift: no target samples");
  const VectorXd gap = mean_features(map, targets) - mean_features(map, particles);
  return solve_drift(map, kernel, particles, gap, ridge, jitter);
}

DriftSolution solve_ntking_drift(const FeatureMap& map, const KernelSpec& kernel,
                                 const ParticleSet& particles, const ParticleSet& targets,
                                 double ridge, double jitter) {
  if (kernel.kind == KernelKind::RbfScalar)
    throw InvalidInput("solve_ntking_drift: expects an NTK or diagonalized kernel");
  if (targets.empty()) throw InvalidInput("solve_ntking_drift: no target samples");
  const VectorXd gap = mean_features(map, targets) - mean_features(map, particles);
  return solve_drift(map, kernel, particles, gap, ridge, jitter);
}

MatrixXd eval_drift(const DriftSolution& sol, const ParticleSet& query) {
  if (query.dim() != sol.anchors.dim()) throw InvalidInput("eval_drift: dimension mismatch");
  if (query.size() == sol.anchors.size() && query.points == sol.anchors.points)
    return apply_blocks(sol.anchor_blocks, sol.anchor_directions, query.size());
  const MatrixXd blocks = sol.custom_kernel
                              ? kernel_blocks(sol.custom_kernel, sol.anchors.points, query.points)
                              : kernel_blocks(sol.kernel, sol.anchors.points, query.points);
  return apply_blocks(blocks, sol.anchor_directions, query.size());
}

MatrixXd kde_score(const MatrixXd& centers, double bandwidth, const MatrixXd& points) {
  if (centers.rows() == 0) throw InvalidInput("kde_score: no centers");
  if (centers.cols() != points.cols()) throw InvalidInput("kde_score: dimension mismatch");
  const double s2 = bandwidth * bandwidth;
  MatrixXd out(points.rows(), points.cols());
  VectorXd logw(centers.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    const Eigen::RowVectorXd x = points.row(i);
    for (Index j = 0; j < centers.rows(); ++j) logw(j) = -(x - centers.row(j)).squaredNorm() / (2.0 * s2);
    const VectorXd w = (logw.array() - logw.maxCoeff()).exp();
    const Eigen::RowVectorXd mean = (w.transpose() * centers) / w.sum();
    out.row(i) = (mean - x) / s2;
  }
  return out;
}

MatrixXd wgf_velocity(const ParticleSet& targets, const ParticleSet& particles,
                      double bandwidth_p, double bandwidth_q) {
  if (targets.empty() || particles.empty()) throw InvalidInput("wgf_velocity: empty set");
  if (!(bandwidth_p > 0.0) || !(bandwidth_q > 0.0)) throw InvalidInput("wgf_velocity: bandwidths must be positive");
  return kde_score(targets.points, bandwidth_p, particles.points) -
         kde_score(particles.points, bandwidth_q, particles.points);
}

MatrixXd mmd_flow_velocity(const ParticleSet& targets, const ParticleSet& particles) {
  if (targets.empty() || particles.empty()) throw InvalidInput("mmd_flow_velocity: empty set");
  if (targets.dim() != particles.dim()) throw InvalidInput("mmd_flow_velocity: dimension mismatch");
  constexpr double kGuard = 1e-12;
  const Index n = particles.size(), m = targets.size();
  const double ratio = static_cast<double>(n) / static_cast<double>(m);
  MatrixXd out = MatrixXd::Zero(n, particles.dim());
  for (Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd x = particles.points.row(i);
    Eigen::RowVectorXd repulse = Eigen::RowVectorXd::Zero(x.size());
    for (Index k = 0; k < n; ++k) {
      const Eigen::RowVectorXd diff = x - particles.points.row(k);
      const double r = diff.norm();
      if (r > 0.0) repulse += diff / (r + kGuard);
    }
    Eigen::RowVectorXd attract = Eigen::RowVectorXd::Zero(x.size());
    for (Index j = 0; j < m; ++j) {
      const Eigen::RowVectorXd diff = x - targets.points.row(j);
      const double r = diff.norm();
      if (r > 0.0) attract += diff / (r + kGuard);
    }
    out.row(i) = repulse - ratio * attract;
  }
  return out;
}

const char* to_string(FlowMethod method) {
  switch (method) {
    case FlowMethod::King: return "king";
    case FlowMethod::NtKing: return "ntking";
    case FlowMethod::Wgf: return "wgf";
    case FlowMethod::MmdFlow: return "mmd_flow";
  }
  return "unknown";
}

FlowMethod flow_method_from_string(const std::string& name) {
  if (name == "king") return FlowMethod::King;
  if (name == "ntking") return FlowMethod::NtKing;
  if (name == "wgf") return FlowMethod::Wgf;
  if (name == "mmd_flow") return FlowMethod::MmdFlow;
  throw InvalidInput("unknown flow method '" + name + "'");
}

void FlowConfig::validate() const {
  if (!(step > 0.0)) throw InvalidInput("flow config: step must be positive");
  if (iterations < 1) throw InvalidInput("flow config: iterations must be >= 1");
  if (!(ridge > 0.0)) throw InvalidInput("flow config: ridge must be positive");
  if (jitter < 0.0) throw InvalidInput("flow config: jitter must be nonnegative");
  if (log_every < 1) throw InvalidInput("flow config: log_every must be >= 1");
}

ParticleSet run_flow(FlowMethod method, const FeatureMap& map, const KernelSpec& kernel,
                     const ParticleSet& targets, const ParticleSet& init, const FlowConfig& cfg,
                     const FlowObserver& observer, const MetricsProvider& metrics) {
  cfg.validate();
  if (init.size() < 2) throw InvalidInput("run_flow: need at least two particles");
  const bool stein = map.kind() == FeatureKind::SteinFeatures;
  const bool kernel_method = method == FlowMethod::King || method == FlowMethod::NtKing;
  if (targets.empty() && !(stein && kernel_method))
    throw InvalidInput("run_flow: target samples are required for this method");
  if (!targets.empty() && targets.dim() != init.dim()) throw InvalidInput("run_flow: dimension mismatch");
  if (kernel_method && map.input_dim() != init.dim())
    throw InvalidInput("run_flow: feature map dimension does not match particles");
  if (method == FlowMethod::King && kernel.kind != KernelKind::RbfScalar)
    throw InvalidInput("run_flow: KiNG uses the RBF cross-gradient kernel");
  if (method == FlowMethod::NtKing && kernel.kind == KernelKind::RbfScalar)
    throw InvalidInput("run_flow: ntKiNG uses an NTK or diagonalized kernel");

  ParticleSet x = init;
  KernelSpec kern = kernel;
  const double target_bw = targets.size() >= 2 ? median_heuristic(targets.points) : 1.0;
  const bool scalar_bw = kern.kind != KernelKind::EmpiricalNtk;
  auto refresh_bandwidth = [&]() {
    return stein ? median_heuristic(x.points) : median_heuristic(x, targets);
  };
  if (kernel_method && scalar_bw) kern.bandwidth = refresh_bandwidth();

  auto report = [&](int iteration, FlowDiagnostics diag) {
    if (!observer) return;
    if (metrics) diag.mmd = metrics(x);
    observer(FlowSnapshot{iteration, x.t, x, diag});
  };
  report(0, FlowDiagnostics{0.0, kernel_method && scalar_bw ? kern.bandwidth : 0.0, {}, {}});

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    FlowDiagnostics diag;
    MatrixXd velocity;
    if (kernel_method) {
      if (scalar_bw && !cfg.freeze_bandwidth) kern.bandwidth = refresh_bandwidth();
      const VectorXd gap = stein ? VectorXd(-mean_features(map, x))
                                 : VectorXd(mean_features(map, targets) - mean_features(map, x));
      const DriftSolution sol = solve_drift(map, kern, x, gap, cfg.ridge, cfg.jitter);
      velocity = eval_drift(sol, x);
      VectorXd m = VectorXd::Zero(gap.size());
      for (Index i = 0; i < x.size(); ++i)
        m += sol.jacobians[static_cast<std::size_t>(i)] * velocity.row(i).transpose();
      m /= static_cast<double>(x.size());
      const VectorXd diff = gap - m;
      diag.residual = diff.dot(sol.fisher.solve(diff));
      diag.bandwidth = scalar_bw ? kern.bandwidth : 0.0;
    } else if (method == FlowMethod::Wgf) {
      const double particle_bw = median_heuristic(x.points);
      velocity = wgf_velocity(targets, x, target_bw, particle_bw);
      diag.bandwidth = particle_bw;
    } else {
      velocity = mmd_flow_velocity(targets, x);
    }
    diag.drift_norm = rms(velocity);

    x.points += cfg.step * velocity;
    x.t += cfg.step;
    if (!x.points.allFinite()) {
      std::ostringstream msg;
      msg << to_string(method) << " flow diverged at iteration " << iter;
      throw Divergence(msg.str(), iter);
    }
    if (iter % cfg.log_every == 0 || iter == cfg.iterations) report(iter, diag);
  }
  return x;
}

}  // namespace kingflow
