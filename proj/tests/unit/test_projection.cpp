#include "doctest.h"

#include "kingflow/flows.hpp"
#include "kingflow/ngd.hpp"
#include "kingflow/projection.hpp"
#include "support.hpp"

using namespace kingflow;
using kftest::rel_err;

namespace {

ParticleSet normals(Index n, Index d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  return ParticleSet(scale * standard_normal(rng, n, d));
}

MatrixXd swirl(const MatrixXd& x) {
  MatrixXd h(x.rows(), 2);
  h.col(0) = 0.5 - 0.3 * x.col(1).array();
  h.col(1) = 0.2 * x.col(0).array() + 0.1 * x.col(1).array().square();
  return h;
}

Trajectory drift_trajectory(const ParticleSet& x0, const MatrixXd& h, double t0) {
  return [=](double t) { return ParticleSet(x0.points + (t - t0) * h, t); };
}

}  // namespace

TEST_CASE("time kernel derivative vanishes at the center") {
  const TimeKernel tk{0.3, 0.1};
  CHECK(time_kernel_deriv(tk, 0.3) == 0.0);
  const double h = 1e-6;
  CHECK(tk.deriv(0.37) == doctest::Approx((tk.value(0.37 + h) - tk.value(0.37 - h)) / (2 * h)));
}

TEST_CASE("time kernel lemmas hold under quadrature") {
  for (double sigma : {0.05, 0.1, 0.5}) {
    const TimeKernel tk{1.0, sigma};
    const auto grid = uniform_time_grid(tk, 161, 8.0);
    const double zeroth = trapezoid(grid, [&](double t) { return tk.deriv(t); });
    const double first = trapezoid(grid, [&](double t) { return (t - tk.center) * tk.deriv(t); });
    CHECK(std::abs(zeroth) < 1e-6);
    CHECK(std::abs(first + 1.0) < 1e-4);
  }
}

TEST_CASE("stationary trajectory projects to zero") {
  const auto map = FeatureMap::gaussian_quadratic(2);
  const ParticleSet x = normals(200, 2, 1);
  const TimeKernel tk{0.0, 0.1};
  const auto res = project_delta_quadrature(
      map, [&](double t) { return ParticleSet(x.points, t); }, tk, uniform_time_grid(tk), 1e-9);
  CHECK(res.delta.norm() < 1e-8);
}

TEST_CASE("linear statistic reduces the limit to Cov^-1 mean(h)") {
  const auto map = FeatureMap::custom_linear(MatrixXd::Identity(2, 2));
  const ParticleSet x = normals(300, 2, 2);
  const MatrixXd h = swirl(x.points);
  const auto res = project_delta_limit(map, x, h, 0.0);
  const VectorXd mu = x.points.colwise().mean();
  const MatrixXd centered = x.points.rowwise() - mu.transpose();
  const MatrixXd cov = centered.transpose() * centered / 300.0;
  const VectorXd want = cov.ldlt().solve(VectorXd(h.colwise().mean()));
  CHECK(rel_err(res.delta, want) < 1e-10);

  const auto zero = project_delta_limit(map, x, MatrixXd::Zero(300, 2), 0.0);
  CHECK(zero.delta.isZero());
}

TEST_CASE("quadrature approaches the limit in one dimension") {
  const auto map = FeatureMap::custom_linear(MatrixXd::Identity(1, 1));
  const ParticleSet x = normals(400, 1, 3);
  const MatrixXd h = (1.0 + 0.5 * x.points.array()).matrix();
  const double var = (x.points.array() - x.points.mean()).square().mean();
  const double want = h.mean() / var;
  double prev = 1e300;
  for (double sigma : {0.5, 0.2, 0.1, 0.05}) {
    const TimeKernel tk{0.0, sigma};
    const auto q = project_delta_quadrature(map, drift_trajectory(x, h, 0.0), tk,
                                            uniform_time_grid(tk), 0.0);
    const double err = std::abs(q.delta(0) - want) / std::abs(want);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("quadrature and limit agree in two dimensions") {
  const auto map = FeatureMap::gaussian_quadratic(2);
  const ParticleSet x = normals(500, 2, 4);
  const MatrixXd h = swirl(x.points);
  const auto lim = project_delta_limit(map, x, h, 0.0);
  double prev = 1e300;
  for (double sigma : {0.5, 0.2, 0.1}) {
    const TimeKernel tk{0.0, sigma};
    const auto q = project_delta_quadrature(map, drift_trajectory(x, h, 0.0), tk,
                                            uniform_time_grid(tk), 0.0);
    const double err = rel_err(q.delta, lim.delta);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 5e-2);
}

TEST_CASE("quadrature grid preconditions") {
  const auto map = FeatureMap::custom_linear(MatrixXd::Identity(1, 1));
  const ParticleSet x = normals(10, 1, 5);
  const Trajectory traj = [&](double t) { return ParticleSet(x.points, t); };
  const TimeKernel tk{0.0, 0.1};
  CHECK_THROWS_AS(project_delta_quadrature(map, traj, tk, uniform_time_grid(tk, 21)), InvalidInput);
  CHECK_THROWS_AS(project_delta_quadrature(map, traj, tk, uniform_time_grid(tk, 81, 3.0)),
                  InvalidInput);
}

TEST_CASE("limit projection is linear in the velocities") {
  const auto map = FeatureMap::gaussian_quadratic(2);
  const ParticleSet x = normals(100, 2, 6);
  Rng rng(7);
  const MatrixXd h1 = standard_normal(rng, 100, 2), h2 = standard_normal(rng, 100, 2);
  const double a = 1.7, b = -0.4;
  const VectorXd combo = project_delta_limit(map, x, a * h1 + b * h2, 1e-8).delta;
  const VectorXd parts = a * project_delta_limit(map, x, h1, 1e-8).delta +
                         b * project_delta_limit(map, x, h2, 1e-8).delta;
  CHECK(rel_err(combo, parts) < 1e-10);
}

TEST_CASE("alignment residual") {
  const auto map = FeatureMap::gaussian_quadratic(2);
  const ParticleSet x = normals(150, 2, 8);
  const ParticleSet y = normals(150, 2, 9, 1.5);
  const auto ngd = natural_gradient_kl(map, y, x, 1e-8);
  const auto proj = project_delta_limit(map, x, swirl(x.points), 1e-8);

  SUBCASE("perfect alignment") {
    ProjectionResult same = proj;
    same.delta = ngd.natural_direction;
    same.fisher_used = ngd.fisher;
    CHECK(alignment_residual(ngd, same, AlignmentMode::Euclidean) < 1e-20);
    CHECK(alignment_residual(ngd, same, AlignmentMode::FisherMetric) < 1e-12);
  }

  SUBCASE("identity metric reduces to the euclidean gap distance") {
    ProjectionResult unit = proj;
    unit.fisher_used = fisher_estimate(FeatureMap::custom_linear(MatrixXd::Identity(5, 5)),
                                       ParticleSet(MatrixXd::Zero(2, 5)), 1.0);
    const double want = (ngd.gap - unit.delta).squaredNorm();
    CHECK(alignment_residual(ngd, unit, AlignmentMode::FisherMetric) ==
          doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("fisher metric equals euclidean distance after whitening") {
    const MatrixXd f = proj.fisher_used.matrix;
    const VectorXd m = f * proj.delta;
    const MatrixXd l = Eigen::LLT<MatrixXd>(f.inverse()).matrixL();
    const double want = (l.transpose() * ngd.gap - l.transpose() * m).squaredNorm();
    CHECK(rel_err(VectorXd::Constant(1, alignment_residual(ngd, proj, AlignmentMode::FisherMetric)),
                  VectorXd::Constant(1, want)) < 1e-10);
  }
}

TEST_CASE("kernel drift drives the fisher residual to zero as the ridge vanishes") {
  const auto map = FeatureMap::gaussian_quadratic(1);
  const ParticleSet x = normals(50, 1, 10);
  const ParticleSet y = normals(50, 1, 11, 1.5);
  const auto ngd = natural_gradient_kl(map, y, x, 0.0);
  const KernelSpec k = KernelSpec::rbf(median_heuristic(x, y));
  auto residual = [&](double ridge) {
    const auto sol = solve_king_drift(map, k, x, y, ridge, 0.0);
    const auto proj = project_delta_limit(map, x, eval_drift(sol, x), 0.0);
    return alignment_residual(ngd, proj, AlignmentMode::FisherMetric);
  };
  const double big = residual(1.0), tiny = residual(1e-8);
  CHECK(tiny < 1e-4 * big);
}
