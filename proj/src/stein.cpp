#include "kingflow/stein.hpp"

#include <cmath>

namespace kingflow {

TargetScore TargetScore::diagonal_gaussian(VectorXd mean, VectorXd variance) {
  if (mean.size() < 1 || mean.size() != variance.size())
    throw InvalidInput("diagonal_gaussian: mean and variance must have equal nonzero length");
  if ((variance.array() <= 0.0).any()) throw InvalidInput("diagonal_gaussian: variance must be positive");
  return TargetScore{Kind::DiagonalGaussian, std::move(mean), std::move(variance)};
}

TargetScore TargetScore::symmetric_mixture(VectorXd offset, VectorXd variance) {
  TargetScore t = diagonal_gaussian(std::move(offset), std::move(variance));
  t.kind = Kind::SymmetricMixture;
  return t;
}

namespace {

// Posterior weight of the +mean component and the two component scores.
struct MixtureTerms {
  double w_plus;
  VectorXd s_plus;
  VectorXd s_minus;
};

MixtureTerms mixture_terms(const TargetScore& t, const VectorXd& x) {
  const VectorXd inv = t.variance.cwiseInverse();
  MixtureTerms m;
  m.s_plus = -(x - t.mean).cwiseProduct(inv);
  m.s_minus = -(x + t.mean).cwiseProduct(inv);
  // log N(+) - log N(-) = 2 <x, mean / var>
  const double logit = 2.0 * x.dot(t.mean.cwiseProduct(inv));
  m.w_plus = 1.0 / (1.0 + std::exp(-logit));
  return m;
}

}  // namespace

VectorXd TargetScore::score(const VectorXd& x) const {
  if (x.size() != dim()) throw InvalidInput("target score: dimension mismatch");
  if (kind == Kind::DiagonalGaussian) return -(x - mean).cwiseQuotient(variance);
  const MixtureTerms m = mixture_terms(*this, x);
  return m.w_plus * m.s_plus + (1.0 - m.w_plus) * m.s_minus;
}

MatrixXd TargetScore::score_jacobian(const VectorXd& x) const {
  if (x.size() != dim()) throw InvalidInput("target score: dimension mismatch");
  MatrixXd h = MatrixXd((-variance.cwiseInverse()).asDiagonal());
  if (kind == Kind::DiagonalGaussian) return h;
  const MixtureTerms m = mixture_terms(*this, x);
  const VectorXd s = m.w_plus * m.s_plus + (1.0 - m.w_plus) * m.s_minus;
  h += m.w_plus * m.s_plus * m.s_plus.transpose() +
       (1.0 - m.w_plus) * m.s_minus * m.s_minus.transpose() - s * s.transpose();
  return h;
}

ParticleSet TargetScore::sample(Index n, std::uint64_t seed) const {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const VectorXd sd = variance.cwiseSqrt();
  MatrixXd out(n, dim());
  for (Index i = 0; i < n; ++i) {
    double sign = 1.0;
    if (kind == Kind::SymmetricMixture) sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    for (Index c = 0; c < dim(); ++c) out(i, c) = sign * mean(c) + sd(c) * normal(rng);
  }
  return ParticleSet(std::move(out));
}

int SteinSpec::leading() const { return constant_test ? base->input_dim() : 0; }

int SteinSpec::feature_dim() const {
  const int b = base->feature_dim();
  return leading() + (pairing == SteinPairing::Full ? b * base->input_dim() : b);
}

int SteinSpec::coordinate(int feature) const { return (feature - leading()) % base->input_dim(); }

int SteinSpec::base_index(int feature) const {
  const int k = feature - leading();
  return pairing == SteinPairing::Full ? k / base->input_dim() : k;
}

VectorXd stein_features(const SteinSpec& spec, const VectorXd& x) {
  const VectorXd s = spec.score.score(x);
  const VectorXd f = spec.base->eval(x);
  const MatrixXd jf = spec.base->jacobian(x);
  const int dt = spec.feature_dim();
  const int lead = spec.leading();
  VectorXd out(dt);
  out.head(lead) = s.head(lead);
  for (int i = lead; i < dt; ++i) {
    const int j = spec.base_index(i);
    const int c = spec.coordinate(i);
    out(i) = s(c) * f(j) + jf(j, c);
  }
  return out;
}

MatrixXd stein_jacobian(const SteinSpec& spec, const VectorXd& x) {
  const VectorXd s = spec.score.score(x);
  const MatrixXd hs = spec.score.score_jacobian(x);
  const VectorXd f = spec.base->eval(x);
  const MatrixXd jf = spec.base->jacobian(x);
  const int d = spec.base->input_dim();
  const int dt = spec.feature_dim();
  const int lead = spec.leading();
  MatrixXd out(dt, d);
  out.topRows(lead) = hs.topRows(lead);
  int cached = -1;
  MatrixXd hf;
  for (int i = lead; i < dt; ++i) {
    const int j = spec.base_index(i);
    const int c = spec.coordinate(i);
    if (j != cached) {
      hf = spec.base->hessian(x, j);
      cached = j;
    }
    out.row(i) = hs.row(c) * f(j) + s(c) * jf.row(j) + hf.row(c);
  }
  return out;
}

NatGradResult stein_natural_gradient(const FeatureMap& map, const ParticleSet& particles,
                                     double jitter) {
  if (map.kind() != FeatureKind::SteinFeatures)
    throw InvalidInput("stein_natural_gradient: feature map is not a Stein map");
  VectorXd gap = -mean_features(map, particles);
  return natural_gradient_from_gap(map, std::move(gap), particles, jitter);
}

}  // namespace kingflow
