// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "kingflow/config.hpp"
#include "kingflow/datasets.hpp"
#include "kingflow/metrics.hpp"
#include "kingflow/ngd.hpp"
#include "kingflow/projection.hpp"
#include "kingflow/scenarios.hpp"
#include "kingflow/stein.hpp"

using namespace kingflow;
using kftest::rel_err;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = Outcome{false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > budget_s) {
    out.pass = false;
    out.detail += fmt("; over time budget %.0f s", budget_s);
  }
  if (!out.pass) ++failures;
  std::printf("%s [%2d] %s: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", id, name,
              out.detail.c_str(), secs);
  std::fflush(stdout);
}

Outcome woodbury() {
  Rng rng(2024);
  const ParticleSet x(standard_normal(rng, 20, 2));
  const ParticleSet y(standard_normal(rng, 20, 2).array() + 0.7);
  const FeatureMap map = FeatureMap::gaussian_quadratic(2);
  const VectorXd gap = mean_features(map, y) - mean_features(map, x);
  const double ridge = 0.1;
  const DriftSolution sol = solve_drift(map, MatrixKernel(kftest::psi_cross_grad), x, gap, ridge, 0.0);
  const MatrixXd dual = eval_drift(sol, x);
  const MatrixXd primal = kftest::primal_drift(map, x.points, sol.fisher.matrix, gap, ridge, x.points);
  const double err = rel_err(dual, primal);
  return {err <= 1e-8, fmt("rel err %.2e", err)};
}

Outcome lemma_quadrature() {
  double worst0 = 0.0, worst1 = 0.0;
  for (double sigma : {0.05, 0.1, 0.5}) {
    const TimeKernel tk{0.3, sigma};
    const auto grid = uniform_time_grid(tk);
    const double i0 = trapezoid(grid, [&](double t) { return tk.deriv(t); });
    const double i1 = trapezoid(grid, [&](double t) { return (t - tk.center) * tk.deriv(t); });
    worst0 = std::max(worst0, std::abs(i0));
    worst1 = std::max(worst1, std::abs(i1 + 1.0));
  }
  std::ostringstream s;
  s << "max |int dl| " << fmt("%.1e", worst0) << ", max |int (t-t0) dl + 1| " << fmt("%.1e", worst1);
  return {worst0 <= 1e-6 && worst1 <= 1e-4, s.str()};
}

Outcome limit_vs_quadrature() {
  Rng rng(7);
  const ParticleSet x0(standard_normal(rng, 200, 2));
  MatrixXd vel(x0.size(), 2);
  for (Index i = 0; i < x0.size(); ++i) {
    const double a = x0.points(i, 0), b = x0.points(i, 1);
    vel(i, 0) = 0.5 + std::sin(b);
    vel(i, 1) = 0.3 * a - 0.2 * a * a;
  }
  const double t0 = 1.0;
  const FeatureMap map = FeatureMap::gaussian_quadratic(2);
  const ProjectionResult limit = project_delta_limit(map, x0, vel, 0.0);
  std::vector<double> errs;
  for (double sigma : {0.5, 0.2, 0.1}) {
    const TimeKernel tk{t0, sigma};
    auto traj = [&](double t) { return ParticleSet(x0.points + (t - t0) * vel, t); };
    const ProjectionResult quad = project_delta_quadrature(map, traj, tk, uniform_time_grid(tk));
    errs.push_back(rel_err(quad.delta, limit.delta));
  }
  const bool mono = errs[0] > errs[1] && errs[1] > errs[2];
  std::ostringstream s;
  s << "rel err " << fmt("%.2e", errs[0]) << " > " << fmt("%.2e", errs[1]) << " > "
    << fmt("%.2e", errs[2]);
  return {mono && errs[2] < 5e-2, s.str()};
}

Outcome bimodal_compare() {
  std::vector<double> king_ratio, nt_ratio, king, nt, wgf, mmdf;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig cfg = RunConfig::defaults(Scenario::BimodalCompare);
    cfg.seed = seed;
    const ScenarioResult r = execute_scenario(cfg);
    const auto& k = r.run(FlowMethod::King).metrics;
    const auto& n = r.run(FlowMethod::NtKing).metrics;
    king_ratio.push_back(k.back().mmd / k.front().mmd);
    nt_ratio.push_back(n.back().mmd / n.front().mmd);
    king.push_back(k.back().mmd);
    nt.push_back(n.back().mmd);
    wgf.push_back(r.run(FlowMethod::Wgf).metrics.back().mmd);
    mmdf.push_back(r.run(FlowMethod::MmdFlow).metrics.back().mmd);
  }
  const double kr = median(king_ratio), nr = median(nt_ratio);
  const double mk = median(king), mn = median(nt), mw = median(wgf), mm = median(mmdf);
  std::ostringstream s;
  s << "median final/initial king " << fmt("%.3f", kr) << " ntking " << fmt("%.3f", nr)
    << "; median final mmd king " << fmt("%.4f", mk) << " ntking " << fmt("%.4f", mn) << " wgf "
    << fmt("%.4f", mw) << " mmd_flow " << fmt("%.4f", mm);
  return {kr < 0.3 && nr < 0.3 && mn <= mw && mn <= mm, s.str()};
}

Outcome gaussian_guidance() {
  std::vector<double> sd, mean;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig cfg = RunConfig::defaults(Scenario::ManifoldGuidance);
    cfg.seed = seed;
    const ScenarioResult r = execute_scenario(cfg);
    const Json& s = r.run(FlowMethod::King).summary;
    sd.push_back(s["std"].get<double>());
    mean.push_back(s["mean"].get<double>());
  }
  const double msd = median(sd), mm = median(mean);
  std::ostringstream s;
  s << "median std " << fmt("%.3f", msd) << ", median mean " << fmt("%.3f", mm);
  return {msd >= 1.5 && msd <= 3.5 && std::abs(mm) < 0.5, s.str()};
}

Outcome rbf_bifurcation() {
  std::vector<double> frac[2], pos[2], neg[2];
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig cfg = RunConfig::defaults(Scenario::ManifoldGuidance);
    cfg.seed = seed;
    cfg.manifold.kind = FeatureKind::RbfFeatures;
    cfg.methods = {FlowMethod::King, FlowMethod::NtKing};
    const ScenarioResult r = execute_scenario(cfg);
    for (int m = 0; m < 2; ++m) {
      const Json& s = r.runs[static_cast<std::size_t>(m)].summary;
      frac[m].push_back(s["fraction_positive"].get<double>());
      pos[m].push_back(s["mean_positive"].is_null() ? 0.0 : s["mean_positive"].get<double>());
      neg[m].push_back(s["mean_negative"].is_null() ? 0.0 : s["mean_negative"].get<double>());
    }
  }
  bool ok = true;
  std::ostringstream s;
  const char* names[2] = {"king", "ntking"};
  for (int m = 0; m < 2; ++m) {
    const double f = median(frac[m]), p = median(pos[m]), n = median(neg[m]);
    ok = ok && f >= 0.3 && f <= 0.7 && p >= 1.0 && p <= 3.0 && n >= -3.0 && n <= -1.0;
    s << (m ? "; " : "") << names[m] << " frac>0 " << fmt("%.2f", f) << " means "
      << fmt("%.2f", p) << "/" << fmt("%.2f", n);
  }
  return {ok, s.str()};
}

Outcome ngd_tracking() {
  const RunConfig cfg = RunConfig::defaults(Scenario::NgdTracking);
  const ScenarioResult r = execute_scenario(cfg);
  const Json& s = r.run(FlowMethod::King).summary;
  const double worst = s["max_w2_particles_vs_ngd"].get<double>();
  const double ep = s["w2_particles_to_target"].get<double>();
  const double en = s["w2_ngd_to_target"].get<double>();
  const std::size_t checkpoints = s["checkpoints"].size() - 1;
  std::ostringstream out;
  out << checkpoints << " checkpoints, max W2(particles, ngd) " << fmt("%.3f", worst)
      << ", endpoint W2 to target particles " << fmt("%.3f", ep) << " ngd " << fmt("%.3f", en);
  return {checkpoints == 10 && worst < 0.3 && ep < 0.3 && en < 0.3, out.str()};
}

Outcome stein() {
  bool ok = true;
  std::ostringstream s;
  Rng rng(11);
  const FeatureMap base = FeatureMap::rbf(standard_normal(rng, 6, 2) * 1.5, 1.0);
  const TargetScore targets[2] = {
      TargetScore::diagonal_gaussian(Eigen::Vector2d(0.5, -1.0), Eigen::Vector2d(1.0, 2.0)),
      TargetScore::symmetric_mixture(Eigen::Vector2d(1.5, 1.0), Eigen::Vector2d(0.5, 0.8))};
  const char* names[2] = {"gaussian", "mixture"};
  for (int k = 0; k < 2; ++k) {
    const FeatureMap map = FeatureMap::stein(base, targets[k], SteinPairing::Full, true);
    const ParticleSet draws = targets[k].sample(100000, 99 + k);
    const MatrixXd feats = map.eval_rows(draws.points);
    const VectorXd mean = feats.colwise().mean();
    const VectorXd sd = ((feats.rowwise() - mean.transpose()).array().square().colwise().sum() /
                         static_cast<double>(feats.rows() - 1))
                            .sqrt();
    const double worst = (mean.array().abs() / (sd.array() / std::sqrt(100000.0))).maxCoeff();
    ok = ok && worst < 4.0;
    s << names[k] << " max |mean|/stderr " << fmt("%.2f", worst) << "; ";
  }
  const RunConfig cfg = RunConfig::defaults(Scenario::SteinSampling);
  const ScenarioResult r = execute_scenario(cfg);
  const double m = r.run(FlowMethod::King).summary["final_mean"][0].get<double>();
  const double m0 = r.data["initial_mean"][0].get<double>();
  ok = ok && std::abs(m) < 0.5 && cfg.flow.iterations <= 100;
  s << "sampling mean " << fmt("%.3f", m0) << " -> " << fmt("%.3f", m) << " in "
    << cfg.flow.iterations << " steps";
  return {ok, s.str()};
}

Outcome hygiene() {
  std::ostringstream s;
  bool ok = true;
  Rng rng(5);
  const MatrixXd pts = standard_normal(rng, 30, 3);
  std::vector<std::pair<std::string, FeatureMap>> maps;
  maps.emplace_back("gaussian_quadratic", FeatureMap::gaussian_quadratic(3));
  maps.emplace_back("rbf", FeatureMap::rbf(standard_normal(rng, 8, 3), 1.3));
  maps.emplace_back("informed_pairwise",
                    FeatureMap::informed_pairwise(standard_normal(rng, 8, 3), 1.3, {{0, 1}, {1, 2}}));
  maps.emplace_back("custom_linear", FeatureMap::custom_linear(standard_normal(rng, 4, 3)));
  const TargetScore gauss = TargetScore::diagonal_gaussian(VectorXd::Zero(3), VectorXd::Ones(3));
  const TargetScore mix =
      TargetScore::symmetric_mixture(VectorXd::Constant(3, 1.0), VectorXd::Constant(3, 0.7));
  maps.emplace_back("stein/quadratic", FeatureMap::stein(FeatureMap::gaussian_quadratic(3), gauss,
                                                         SteinPairing::RoundRobin, true));
  maps.emplace_back("stein/rbf-mixture",
                    FeatureMap::stein(FeatureMap::rbf(standard_normal(rng, 5, 3), 1.1), mix,
                                      SteinPairing::Full, false));
  double worst_jac = 0.0;
  for (const auto& [name, map] : maps) {
    for (Index i = 0; i < 5; ++i) {
      const VectorXd x = pts.row(i).transpose();
      const MatrixXd fd = kftest::fd_jacobian([&](const VectorXd& v) { return map.eval(v); }, x);
      worst_jac = std::max(worst_jac, rel_err(map.jacobian(x), fd));
    }
  }
  ok = ok && worst_jac < 1e-5;
  s << "max jacobian rel err " << fmt("%.1e", worst_jac);

  double min_fisher = 1e300, min_gamma = 1e300;
  const ParticleSet cloud(pts);
  const ParticleSet shifted(pts.array() + 0.5);
  for (const auto& [name, map] : maps) {
    const FisherMatrix f = fisher_estimate_scaled(map, cloud, 1e-6);
    min_fisher = std::min(min_fisher, kftest::min_eigen(f.matrix));
    const VectorXd gap = mean_features(map, shifted) - mean_features(map, cloud);
    for (const KernelSpec& k : {KernelSpec::rbf(median_heuristic(cloud.points)),
                                KernelSpec::diagonalized(1.0),
                                KernelSpec::empirical_ntk(NtkSpec(3, 16, 1))}) {
      const DriftSolution sol = solve_drift(map, k, cloud, gap, 1e-3, 1e-6);
      min_gamma = std::min(min_gamma, kftest::min_eigen(sol.gamma.matrix));
    }
  }
  ok = ok && min_fisher > 0.0 && min_gamma > 0.0;
  s << ", min eig fisher " << fmt("%.1e", min_fisher) << " gamma " << fmt("%.1e", min_gamma);

  double worst_ntk = 0.0;
  for (auto [d, h] : {std::pair{2, 4}, std::pair{3, 8}}) {
    const NtkSpec spec(d, h, 17);
    Rng r2(3);
    const MatrixXd q = standard_normal(r2, 4, d);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j) {
        const VectorXd x = q.row(i).transpose(), y = q.row(j).transpose();
        worst_ntk = std::max(worst_ntk, rel_err(ntk_value(spec, x, y), kftest::fd_ntk(spec, x, y)));
      }
  }
  ok = ok && worst_ntk < 1e-4;
  s << ", ntk rel err " << fmt("%.1e", worst_ntk);

  const ParticleSet a(standard_normal(rng, 40, 2));
  const ParticleSet b(standard_normal(rng, 30, 2).array() + 1.0);
  const double self = mmd(a, a).value;
  const double asym = std::abs(mmd(a, b).value - mmd(b, a).value);
  ok = ok && self == 0.0 && asym < 1e-12;
  s << ", mmd(a,a) " << fmt("%.1e", self) << " |mmd(a,b)-mmd(b,a)| " << fmt("%.1e", asym);
  return {ok, s.str()};
}

Outcome rotation() {
  const RunConfig cfg = RunConfig::defaults(Scenario::CovariateShiftRotation);
  const ScenarioResult r = execute_scenario(cfg);
  const double before = r.data["initial_nearest_distance"].get<double>();
  const double after = r.run(FlowMethod::NtKing).summary["final_nearest_distance"].get<double>();
  return {after <= 0.5 * before,
          "mean nearest-source distance " + fmt("%.3f", before) + " -> " + fmt("%.3f", after)};
}

Outcome graphical_model() {
  RunConfig cfg = RunConfig::defaults(Scenario::GraphicalModel);
  const ScenarioResult informed = execute_scenario(cfg);
  cfg.manifold.kind = FeatureKind::RbfFeatures;
  const ScenarioResult plain = execute_scenario(cfg);
  const double ri = informed.run(FlowMethod::NtKing).summary["edge_recall"].get<double>();
  const double rp = plain.run(FlowMethod::NtKing).summary["edge_recall"].get<double>();
  const std::size_t edges = informed.data["edges"].size();
  std::ostringstream s;
  s << edges << " true edges, recall after " << cfg.flow.iterations << " iterations informed "
    << fmt("%.2f", ri) << " plain " << fmt("%.2f", rp);
  return {ri >= 0.9 && rp < ri, s.str()};
}

}  // namespace

int main() {
  criterion(1, "dual/primal drift equivalence", 1.0, woodbury);
  criterion(2, "time-kernel lemma quadrature", 1.0, lemma_quadrature);
  criterion(3, "limit vs quadrature projection", 5.0, limit_vs_quadrature);
  criterion(4, "bimodal comparison d=5", 120.0, bimodal_compare);
  criterion(5, "gaussian manifold guidance", 30.0, gaussian_guidance);
  criterion(6, "rbf manifold bifurcation", 60.0, rbf_bifurcation);
  criterion(7, "tracking exact parametric NGD", 60.0, ngd_tracking);
  criterion(8, "stein identity and sampling", 30.0, stein);
  criterion(9, "numerical hygiene", 30.0, hygiene);
  criterion(10, "rotation covariate shift", 30.0, rotation);
  criterion(11, "informed statistics graph recovery", 120.0, graphical_model);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
