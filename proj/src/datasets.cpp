#include "kingflow/datasets.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "kingflow/linalg.hpp"

namespace kingflow {

ParticleSet gen_gaussian_mixture(int dim, const std::vector<VectorXd>& means,
                                 const std::vector<double>& weights, Index n, std::uint64_t seed) {
  if (dim < 1) throw InvalidInput("gen_gaussian_mixture: dim must be >= 1");
  if (means.empty() || means.size() != weights.size())
    throw InvalidInput("gen_gaussian_mixture: need one weight per mean");
  for (const auto& m : means)
    if (m.size() != dim) throw InvalidInput("gen_gaussian_mixture: mean has wrong dimension");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidInput("gen_gaussian_mixture: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("gen_gaussian_mixture: weights must sum to 1");

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd out(n, dim);
  for (Index i = 0; i < n; ++i) {
    std::size_t comp = 0;
    if (means.size() > 1) {
      const double u = unit(rng);
      double acc = 0.0;
      comp = means.size() - 1;
      for (std::size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) {
          comp = k;
          break;
        }
      }
    }
    for (int c = 0; c < dim; ++c) out(i, c) = means[comp](c) + normal(rng);
  }
  return ParticleSet(std::move(out));
}

ParticleSet gen_bimodal(int dim, double offset, Index n, std::uint64_t seed) {
  const VectorXd m = VectorXd::Constant(dim, offset);
  return gen_gaussian_mixture(dim, {-m, m}, {0.5, 0.5}, n, seed);
}

ParticleSet gen_scurve(Index n, double noise_sd, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("gen_scurve: n must be >= 1");
  if (noise_sd < 0.0) throw InvalidInput("gen_scurve: noise must be nonnegative");
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(-1.5 * std::numbers::pi, 1.5 * std::numbers::pi);
  std::uniform_real_distribution<double> height(0.0, 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd out(n, 3);
  for (Index i = 0; i < n; ++i) {
    const double u = angle(rng);
    const double v = height(rng);
    const double sign = u < 0.0 ? -1.0 : (u > 0.0 ? 1.0 : 0.0);
    out(i, 0) = std::sin(u);
    out(i, 1) = sign * (std::cos(u) - 1.0);
    out(i, 2) = v;
    if (noise_sd > 0.0)
      for (int c = 0; c < 3; ++c) out(i, c) += noise_sd * normal(rng);
  }
  return ParticleSet(std::move(out));
}

GgmSpec GgmSpec::make(int dim, double edge_prob, double edge_value, std::uint64_t seed) {
  if (dim < 1) throw InvalidInput("GgmSpec: dim must be >= 1");
  if (edge_prob < 0.0 || edge_prob > 1.0) throw InvalidInput("GgmSpec: edge_prob must be in [0, 1]");
  GgmSpec spec;
  spec.dim = dim;
  spec.edge_prob = edge_prob;
  spec.edge_value = edge_value;
  spec.seed = seed;
  spec.precision = MatrixXd::Identity(dim, dim);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      if (unit(rng) < edge_prob) {
        spec.precision(i, j) = edge_value;
        spec.precision(j, i) = edge_value;
        spec.edges.emplace_back(i, j);
      }
    }
  }
  while (Eigen::LLT<MatrixXd>(spec.precision).info() != Eigen::Success)
    spec.precision.diagonal().array() += 0.1;
  return spec;
}

ParticleSet gen_ggm_samples(const GgmSpec& spec, Index n, std::uint64_t seed) {
  Eigen::LLT<MatrixXd> llt(spec.precision);
  if (spec.precision.rows() != spec.dim || llt.info() != Eigen::Success)
    throw InvalidInput("gen_ggm_samples: precision is not PD");
  // x = L^{-T} z has covariance (L L^T)^{-1} = Theta^{-1}.
  Rng rng(seed);
  const MatrixXd z = standard_normal(rng, n, spec.dim);
  const MatrixXd lower = llt.matrixL();
  MatrixXd x = lower.transpose().triangularView<Eigen::Upper>().solve(z.transpose()).transpose();
  return ParticleSet(std::move(x));
}

ParticleSet rotate_dataset(const ParticleSet& points, double degrees) {
  if (points.dim() < 2) throw InvalidInput("rotate_dataset: need at least two coordinates");
  const double a = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  ParticleSet out = points;
  for (Index i = 0; i < points.size(); ++i) {
    const double x = points.points(i, 0), y = points.points(i, 1);
    out.points(i, 0) = c * x + s * y;
    out.points(i, 1) = -s * x + c * y;
  }
  return out;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> precision_support(const ParticleSet& points,
                                                                      double threshold) {
  const Index n = points.size(), d = points.dim();
  if (n <= d) throw InvalidInput("precision_support: need more samples than dimensions");
  const VectorXd mean = pairwise_mean_rows(points.points);
  const MatrixXd cov = population_covariance(points.points, mean);
  const SpdFactor f = factorize_spd(cov, 1e-6 * cov.trace() / static_cast<double>(d), "precision_support");
  const MatrixXd precision = f.inverse();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> support(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      support(i, j) = i != j && std::abs(0.5 * (precision(i, j) + precision(j, i))) > threshold;
  return support;
}

double edge_recall(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& support,
                   const std::vector<std::pair<int, int>>& edges) {
  if (edges.empty()) return 1.0;
  int hit = 0;
  for (const auto& [i, j] : edges) hit += support(i, j) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(edges.size());
}

}  // namespace kingflow
