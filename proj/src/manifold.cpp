#include "kingflow/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kingflow/kernels.hpp"
#include "kingflow/stein.hpp"

namespace kingflow {

namespace {

int quadratic_dim(int d) { return d + d * (d + 1) / 2; }

// Index pairs (i, j), i <= j, in row-major upper-triangle order.
std::vector<std::pair<int, int>> upper_triangle(int d) {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(d * (d + 1) / 2));
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) out.emplace_back(i, j);
  return out;
}

void rbf_block(const MatrixXd& centers, double sigma, const VectorXd& x, Eigen::Ref<VectorXd> out) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (Index r = 0; r < centers.rows(); ++r)
    out(r) = std::exp(-(x - centers.row(r).transpose()).squaredNorm() * inv);
}

void rbf_jacobian_block(const MatrixXd& centers, double sigma, const VectorXd& x,
                        Eigen::Ref<MatrixXd> out) {
  const double s2 = sigma * sigma;
  for (Index r = 0; r < centers.rows(); ++r) {
    const VectorXd diff = centers.row(r).transpose() - x;
    const double k = std::exp(-diff.squaredNorm() / (2.0 * s2));
    out.row(r) = (k / s2) * diff.transpose();
  }
}

MatrixXd rbf_hessian(const VectorXd& center, double sigma, const VectorXd& x) {
  const double s2 = sigma * sigma;
  const VectorXd diff = center - x;
  const double k = std::exp(-diff.squaredNorm() / (2.0 * s2));
  MatrixXd h = diff * diff.transpose() / (s2 * s2);
  h.diagonal().array() -= 1.0 / s2;
  return k * h;
}

void check_pairs(const std::vector<std::pair<int, int>>& pairs, int d) {
  for (const auto& [i, j] : pairs)
    if (i < 0 || j < 0 || i >= d || j >= d)
      throw InvalidInput("informed pairwise index out of range");
}

std::vector<Index> choose_rows(Index n, int count, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (count >= n) return idx;
  // Partial Fisher-Yates; std::shuffle's draw pattern is not pinned down
  // across standard libraries.
  Rng rng(seed);
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

}  // namespace

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::GaussianQuadratic: return "gaussian_quadratic";
    case FeatureKind::RbfFeatures: return "rbf";
    case FeatureKind::InformedPairwise: return "informed_pairwise";
    case FeatureKind::SteinFeatures: return "stein";
    case FeatureKind::CustomLinear: return "custom_linear";
  }
  return "unknown";
}

FeatureMap FeatureMap::gaussian_quadratic(int dim) {
  if (dim < 1) throw InvalidInput("gaussian_quadratic: dim must be >= 1");
  FeatureMap m;
  m.kind_ = FeatureKind::GaussianQuadratic;
  m.input_dim_ = dim;
  m.feature_dim_ = quadratic_dim(dim);
  return m;
}

FeatureMap FeatureMap::rbf(MatrixXd centers, double bandwidth) {
  if (centers.rows() < 1 || centers.cols() < 1) throw InvalidInput("rbf: need at least one center");
  if (!(bandwidth > 0.0)) throw InvalidInput("rbf: bandwidth must be positive");
  FeatureMap m;
  m.kind_ = FeatureKind::RbfFeatures;
  m.input_dim_ = static_cast<int>(centers.cols());
  m.feature_dim_ = static_cast<int>(centers.rows());
  m.centers_ = std::move(centers);
  m.bandwidth_ = bandwidth;
  return m;
}

FeatureMap FeatureMap::informed_pairwise(MatrixXd centers, double bandwidth,
                                         std::vector<std::pair<int, int>> pairs) {
  FeatureMap m = rbf(std::move(centers), bandwidth);
  check_pairs(pairs, m.input_dim_);
  m.kind_ = FeatureKind::InformedPairwise;
  m.feature_dim_ += static_cast<int>(pairs.size());
  m.pairs_ = std::move(pairs);
  return m;
}

FeatureMap FeatureMap::custom_linear(MatrixXd weight) {
  if (weight.rows() < 1 || weight.cols() < 1) throw InvalidInput("custom_linear: empty weight");
  FeatureMap m;
  m.kind_ = FeatureKind::CustomLinear;
  m.input_dim_ = static_cast<int>(weight.cols());
  m.feature_dim_ = static_cast<int>(weight.rows());
  m.weight_ = std::move(weight);
  return m;
}

FeatureMap FeatureMap::stein(FeatureMap base, TargetScore score, SteinPairing pairing,
                             bool constant_test) {
  if (base.kind() == FeatureKind::SteinFeatures)
    throw InvalidInput("stein: base map cannot itself be a Stein map");
  if (score.dim() != base.input_dim())
    throw InvalidInput("stein: target score dimension does not match base map");
  FeatureMap m;
  m.kind_ = FeatureKind::SteinFeatures;
  m.input_dim_ = base.input_dim();
  m.feature_dim_ = (pairing == SteinPairing::Full ? base.feature_dim() * base.input_dim()
                                                  : base.feature_dim()) +
                   (constant_test ? base.input_dim() : 0);
  auto spec = std::make_shared<SteinSpec>();
  spec->constant_test = constant_test;
  spec->base = std::make_shared<const FeatureMap>(std::move(base));
  spec->score = std::move(score);
  spec->pairing = pairing;
  m.stein_ = std::move(spec);
  return m;
}

const SteinSpec& FeatureMap::stein_spec() const {
  if (!stein_) throw InvalidInput("feature map is not a Stein map");
  return *stein_;
}

void FeatureMap::check_point(const VectorXd& x) const {
  if (x.size() != input_dim_) {
    std::ostringstream msg;
    msg << to_string(kind_) << " feature map expects dimension " << input_dim_ << ", got "
        << x.size();
    throw InvalidInput(msg.str());
  }
}

VectorXd FeatureMap::eval(const VectorXd& x) const {
  check_point(x);
  VectorXd out(feature_dim_);
  switch (kind_) {
    case FeatureKind::GaussianQuadratic: {
      out.head(input_dim_) = x;
      Index k = input_dim_;
      for (const auto& [i, j] : upper_triangle(input_dim_)) out(k++) = x(i) * x(j);
      break;
    }
    case FeatureKind::RbfFeatures:
      rbf_block(centers_, bandwidth_, x, out);
      break;
    case FeatureKind::InformedPairwise: {
      rbf_block(centers_, bandwidth_, x, out.head(centers_.rows()));
      Index k = centers_.rows();
      for (const auto& [i, j] : pairs_) out(k++) = x(i) * x(j);
      break;
    }
    case FeatureKind::SteinFeatures:
      return stein_features(*stein_, x);
    case FeatureKind::CustomLinear:
      out = weight_ * x;
      break;
  }
  return out;
}

MatrixXd FeatureMap::jacobian(const VectorXd& x) const {
  check_point(x);
  MatrixXd out = MatrixXd::Zero(feature_dim_, input_dim_);
  switch (kind_) {
    case FeatureKind::GaussianQuadratic: {
      out.topRows(input_dim_).setIdentity();
      Index k = input_dim_;
      for (const auto& [i, j] : upper_triangle(input_dim_)) {
        out(k, i) += x(j);
        out(k, j) += x(i);
        ++k;
      }
      break;
    }
    case FeatureKind::RbfFeatures:
      rbf_jacobian_block(centers_, bandwidth_, x, out);
      break;
    case FeatureKind::InformedPairwise: {
      rbf_jacobian_block(centers_, bandwidth_, x, out.topRows(centers_.rows()));
      Index k = centers_.rows();
      for (const auto& [i, j] : pairs_) {
        out(k, i) += x(j);
        out(k, j) += x(i);
        ++k;
      }
      break;
    }
    case FeatureKind::SteinFeatures:
      return stein_jacobian(*stein_, x);
    case FeatureKind::CustomLinear:
      out = weight_;
      break;
  }
  return out;
}

MatrixXd FeatureMap::hessian(const VectorXd& x, int r) const {
  check_point(x);
  if (r < 0 || r >= feature_dim_) throw InvalidInput("hessian: feature index out of range");
  MatrixXd h = MatrixXd::Zero(input_dim_, input_dim_);
  auto monomial = [&h](int i, int j) {
    h(i, j) += 1.0;
    h(j, i) += 1.0;
  };
  switch (kind_) {
    case FeatureKind::GaussianQuadratic:
      if (r >= input_dim_) {
        const auto [i, j] = upper_triangle(input_dim_)[static_cast<std::size_t>(r - input_dim_)];
        monomial(i, j);
      }
      break;
    case FeatureKind::RbfFeatures:
      h = rbf_hessian(centers_.row(r).transpose(), bandwidth_, x);
      break;
    case FeatureKind::InformedPairwise:
      if (r < centers_.rows()) {
        h = rbf_hessian(centers_.row(r).transpose(), bandwidth_, x);
      } else {
        const auto [i, j] = pairs_[static_cast<std::size_t>(r - centers_.rows())];
        monomial(i, j);
      }
      break;
    case FeatureKind::SteinFeatures:
      throw InvalidInput("hessian: not available for Stein features");
    case FeatureKind::CustomLinear:
      break;
  }
  return h;
}

MatrixXd FeatureMap::eval_rows(const MatrixXd& points) const {
  MatrixXd out(points.rows(), feature_dim_);
  for (Index i = 0; i < points.rows(); ++i) out.row(i) = eval(points.row(i).transpose()).transpose();
  return out;
}

std::vector<MatrixXd> FeatureMap::jacobian_rows(const MatrixXd& points) const {
  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) out.push_back(jacobian(points.row(i).transpose()));
  return out;
}

FeatureMap make_rbf_map(const ParticleSet& initial, const ParticleSet& targets, int count,
                        std::uint64_t seed) {
  if (initial.empty()) throw InvalidInput("make_rbf_map: no initial particles");
  if (count < 1) throw InvalidInput("make_rbf_map: center count must be >= 1");
  const auto rows = choose_rows(initial.size(), count, seed);
  MatrixXd centers(static_cast<Index>(rows.size()), initial.dim());
  for (std::size_t r = 0; r < rows.size(); ++r)
    centers.row(static_cast<Index>(r)) = initial.points.row(rows[r]);
  return FeatureMap::rbf(std::move(centers), median_heuristic(initial, targets));
}

FeatureMap make_informed_map(const ParticleSet& initial, const ParticleSet& targets, int count,
                             std::vector<std::pair<int, int>> pairs, std::uint64_t seed) {
  FeatureMap base = make_rbf_map(initial, targets, count, seed);
  return FeatureMap::informed_pairwise(base.centers(), base.bandwidth(), std::move(pairs));
}

VectorXd mean_features(const FeatureMap& map, const ParticleSet& points) {
  if (points.empty()) throw InvalidInput("mean_features: empty point set");
  if (points.dim() != map.input_dim()) throw InvalidInput("mean_features: dimension mismatch");
  return pairwise_mean_rows(map.eval_rows(points.points));
}

VectorXd FisherMatrix::solve(const VectorXd& rhs) const {
  const auto l = factor.triangularView<Eigen::Lower>();
  VectorXd y = l.solve(rhs);
  return l.transpose().solve(y);
}

namespace {

MatrixXd raw_fisher(const FeatureMap& map, const ParticleSet& points) {
  if (points.size() < 2) throw InvalidInput("fisher_estimate: need at least two particles");
  if (points.dim() != map.input_dim()) throw InvalidInput("fisher_estimate: dimension mismatch");
  const MatrixXd feats = map.eval_rows(points.points);
  return population_covariance(feats, pairwise_mean_rows(feats));
}

FisherMatrix to_fisher(const MatrixXd& raw, double jitter) {
  SpdFactor f = factorize_spd(raw, jitter, "fisher_estimate");
  return FisherMatrix{std::move(f.matrix), f.jitter, std::move(f.lower)};
}

}  // namespace

FisherMatrix fisher_estimate(const FeatureMap& map, const ParticleSet& points, double jitter) {
  return to_fisher(raw_fisher(map, points), jitter);
}

double scaled_jitter(const MatrixXd& raw_cov, double relative) {
  const double scale = raw_cov.trace() / static_cast<double>(raw_cov.rows());
  return relative * (scale > 0.0 ? scale : 1.0);
}

FisherMatrix fisher_estimate_scaled(const FeatureMap& map, const ParticleSet& points,
                                    double relative_jitter) {
  const MatrixXd raw = raw_fisher(map, points);
  return to_fisher(raw, scaled_jitter(raw, relative_jitter));
}

}  // namespace kingflow
