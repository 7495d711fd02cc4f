#include "kingflow/scenarios.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "kingflow/datasets.hpp"
#include "kingflow/metrics.hpp"
#include "kingflow/ngd.hpp"
#include "kingflow/stein.hpp"

namespace kingflow {

namespace {

constexpr const char* kVersion = "0.1.0";

/// Everything a scenario feeds to the flows.
struct Problem {
  ParticleSet init;
  ParticleSet targets;
  /// Samples the MMD column is measured against.
  ParticleSet reference;
  std::optional<FeatureMap> map;
  std::optional<GgmSpec> ggm;
  std::vector<GaussianMoments> ngd_path;
  Json seeds = Json::object();
  Json data = Json::object();
};

std::uint64_t stream_seed(Problem& p, std::uint64_t seed, const char* name) {
  const std::uint64_t s = derive_seed(seed, name);
  p.seeds[name] = s;
  return s;
}

double sample_std(const ParticleSet& x) {
  const double m = x.points.mean();
  return std::sqrt((x.points.array() - m).square().mean());
}

std::vector<std::pair<int, int>> support_edges(
    const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& s) {
  std::vector<std::pair<int, int>> out;
  for (Index i = 0; i < s.rows(); ++i)
    for (Index j = i + 1; j < s.cols(); ++j)
      if (s(i, j)) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return out;
}

Json edges_json(const std::vector<std::pair<int, int>>& edges) {
  Json out = Json::array();
  for (const auto& [i, j] : edges) out.push_back(Json::array({i, j}));
  return out;
}

TargetScore stein_target(const RunConfig& cfg) {
  const int d = cfg.data.dim;
  if (cfg.data.stein_target == "mixture")
    return TargetScore::symmetric_mixture(VectorXd::Constant(d, cfg.data.offset), VectorXd::Ones(d));
  VectorXd mean = cfg.data.target_mean ? *cfg.data.target_mean : VectorXd::Zero(d);
  VectorXd var = cfg.data.target_cov ? VectorXd(cfg.data.target_cov->diagonal()) : VectorXd::Ones(d);
  return TargetScore::diagonal_gaussian(std::move(mean), std::move(var));
}

FeatureMap build_map(const RunConfig& cfg, Problem& p) {
  const std::uint64_t seed = stream_seed(p, cfg.seed, "centers");
  switch (cfg.manifold.kind) {
    case FeatureKind::GaussianQuadratic:
      return FeatureMap::gaussian_quadratic(cfg.data.dim);
    case FeatureKind::RbfFeatures:
      return make_rbf_map(p.init, p.targets, cfg.manifold.centers, seed);
    case FeatureKind::InformedPairwise:
      if (!p.ggm) throw ConfigError("informed_pairwise needs a graphical model");
      return make_informed_map(p.init, p.targets, cfg.manifold.centers, p.ggm->edges, seed);
    case FeatureKind::SteinFeatures:
      return FeatureMap::stein(FeatureMap::gaussian_quadratic(cfg.data.dim), stein_target(cfg),
                               SteinPairing::RoundRobin, cfg.manifold.constant_test);
    case FeatureKind::CustomLinear:
      break;
  }
  throw ConfigError("manifold kind is not supported by the scenarios");
}

Problem build_problem(const RunConfig& cfg) {
  Problem p;
  const auto& d = cfg.data;
  const int dim = d.dim;
  const VectorXd zero = VectorXd::Zero(dim);
  const MatrixXd eye = MatrixXd::Identity(dim, dim);

  switch (cfg.scenario) {
    case Scenario::BimodalCompare:
    case Scenario::ManifoldGuidance:
      p.targets = gen_bimodal(dim, d.offset, d.n_targets, stream_seed(p, cfg.seed, "targets"));
      p.init = sample_gaussian(zero, eye, d.n_particles, stream_seed(p, cfg.seed, "init"));
      p.reference = gen_bimodal(dim, d.offset, d.n_targets, stream_seed(p, cfg.seed, "reference"));
      break;
    case Scenario::NgdTracking:
      p.targets = sample_gaussian(*d.target_mean, *d.target_cov, d.n_targets,
                                  stream_seed(p, cfg.seed, "targets"));
      p.init = sample_gaussian(zero, eye, d.n_particles, stream_seed(p, cfg.seed, "init"));
      p.reference = p.targets;
      break;
    case Scenario::GraphicalModel: {
      p.ggm = GgmSpec::make(dim, d.edge_prob, d.edge_value, stream_seed(p, cfg.seed, "graph"));
      p.targets = gen_ggm_samples(*p.ggm, d.n_targets, stream_seed(p, cfg.seed, "targets"));
      p.init = sample_gaussian(zero, eye, d.n_particles, stream_seed(p, cfg.seed, "init"));
      p.reference = p.targets;
      p.data["edges"] = edges_json(p.ggm->edges);
      p.data["precision"] = matrix_to_json(p.ggm->precision);
      const auto target_support = precision_support(p.targets, d.threshold);
      p.data["target_recall"] = edge_recall(target_support, p.ggm->edges);
      p.data["initial_recall"] = edge_recall(precision_support(p.init, d.threshold), p.ggm->edges);
      break;
    }
    case Scenario::CovariateShiftRotation: {
      const std::vector<VectorXd> means = {Eigen::Vector2d(10.0, 0.0), Eigen::Vector2d(0.0, 7.0),
                                           Eigen::Vector2d(-7.0, -7.0)};
      const std::vector<double> weights = {0.4, 0.3, 0.3};
      p.targets = gen_gaussian_mixture(2, means, weights, d.n_targets,
                                       stream_seed(p, cfg.seed, "source"));
      ParticleSet shifted = gen_gaussian_mixture(2, means, weights, d.n_particles,
                                                 stream_seed(p, cfg.seed, "shifted"));
      p.targets.points *= d.cluster_scale;
      shifted.points *= d.cluster_scale;
      p.init = rotate_dataset(shifted, d.degrees);
      p.reference = p.targets;
      p.data["initial_nearest_distance"] = mean_nearest_distance(p.init, p.targets);
      break;
    }
    case Scenario::SteinSampling: {
      const TargetScore score = stein_target(cfg);
      p.init = sample_gaussian(VectorXd::Constant(dim, d.init_mean), eye, d.n_particles,
                               stream_seed(p, cfg.seed, "init"));
      p.reference = score.sample(std::max(d.n_particles, 2), stream_seed(p, cfg.seed, "reference"));
      p.data["initial_mean"] = vector_to_json(pairwise_mean_rows(p.init.points));
      break;
    }
  }

  const bool kernel_method = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](FlowMethod m) {
    return m == FlowMethod::King || m == FlowMethod::NtKing;
  });
  if (kernel_method) p.map = build_map(cfg, p);

  if (cfg.scenario == Scenario::NgdTracking) {
    GaussianNaturalParams theta = gaussian_moment_to_natural(zero, eye);
    const std::uint64_t base = stream_seed(p, cfg.seed, "ngd");
    p.ngd_path.push_back(GaussianMoments{zero, eye});
    for (int k = 1; k <= cfg.flow.iterations; ++k) {
      theta = exact_ngd_step(theta, p.targets, cfg.flow.step, d.mc_samples,
                             derive_seed(base, std::to_string(k)));
      p.ngd_path.push_back(gaussian_natural_to_moment(theta));
    }
  }
  return p;
}

KernelSpec build_kernel(const RunConfig& cfg, FlowMethod method, Problem& p) {
  if (method != FlowMethod::NtKing) return KernelSpec::rbf(1.0);
  if (cfg.kernel.ntking_kind == KernelKind::DiagonalizedScalar) return KernelSpec::diagonalized(1.0);
  return KernelSpec::empirical_ntk(
      NtkSpec(cfg.data.dim, cfg.kernel.ntk_width, stream_seed(p, cfg.seed, "ntk")));
}

Json summarize(const RunConfig& cfg, const Problem& p, const MethodRun& run) {
  Json s = Json::object();
  const ParticleSet& x = run.final;
  s["final_mmd"] = run.metrics.back().mmd;
  s["initial_mmd"] = run.metrics.front().mmd;
  switch (cfg.scenario) {
    case Scenario::BimodalCompare:
      break;
    case Scenario::ManifoldGuidance: {
      int pos = 0;
      double sum_pos = 0.0, sum_neg = 0.0;
      for (Index i = 0; i < x.size(); ++i) {
        const double v = x.points(i, 0);
        if (v > 0.0) {
          ++pos;
          sum_pos += v;
        } else {
          sum_neg += v;
        }
      }
      const Index neg = x.size() - pos;
      s["mean"] = x.points.col(0).mean();
      s["std"] = sample_std(ParticleSet(MatrixXd(x.points.col(0))));
      s["fraction_positive"] = static_cast<double>(pos) / static_cast<double>(x.size());
      s["mean_positive"] = pos > 0 ? Json(sum_pos / pos) : Json();
      s["mean_negative"] = neg > 0 ? Json(sum_neg / static_cast<double>(neg)) : Json();
      break;
    }
    case Scenario::NgdTracking: {
      Json checkpoints = Json::array();
      double worst = 0.0;
      for (const Snapshot& snap : run.snapshots) {
        const GaussianMoments fit = fit_gaussian(ParticleSet(snap.points));
        const GaussianMoments& ngd = p.ngd_path[static_cast<std::size_t>(snap.iteration)];
        const double w2 = gaussian_w2(fit.mean, fit.cov, ngd.mean, ngd.cov);
        worst = std::max(worst, w2);
        checkpoints.push_back(Json{{"iteration", snap.iteration}, {"w2_particles_vs_ngd", w2}});
      }
      const GaussianMoments fit = fit_gaussian(x);
      const GaussianMoments& last = p.ngd_path.back();
      s["checkpoints"] = std::move(checkpoints);
      s["max_w2_particles_vs_ngd"] = worst;
      s["w2_particles_to_target"] =
          gaussian_w2(fit.mean, fit.cov, *cfg.data.target_mean, *cfg.data.target_cov);
      s["w2_ngd_to_target"] =
          gaussian_w2(last.mean, last.cov, *cfg.data.target_mean, *cfg.data.target_cov);
      break;
    }
    case Scenario::GraphicalModel: {
      const auto support = precision_support(x, cfg.data.threshold);
      s["edge_recall"] = edge_recall(support, p.ggm->edges);
      s["recovered_edges"] = edges_json(support_edges(support));
      break;
    }
    case Scenario::CovariateShiftRotation:
      s["final_nearest_distance"] = mean_nearest_distance(x, p.targets);
      break;
    case Scenario::SteinSampling: {
      const GaussianMoments fit = fit_gaussian(x);
      s["final_mean"] = vector_to_json(fit.mean);
      s["final_std"] = vector_to_json(fit.cov.diagonal().cwiseSqrt());
      break;
    }
  }
  return s;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  std::vector<std::uint32_t> words = {static_cast<std::uint32_t>(seed),
                                      static_cast<std::uint32_t>(seed >> 32)};
  for (char c : stream) words.push_back(static_cast<unsigned char>(c));
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

const MethodRun& ScenarioResult::run(FlowMethod method) const {
  for (const auto& r : runs)
    if (r.method == method) return r;
  throw InvalidInput(std::string("scenario result has no run for ") + to_string(method));
}

ScenarioResult execute_scenario(const RunConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Problem p = build_problem(cfg);

  ScenarioResult result;
  result.config = cfg;
  result.map = p.map;

  const ParticleSet& reference = p.reference;
  for (FlowMethod method : cfg.methods) {
    MethodRun run;
    run.method = method;
    run.flow = cfg.flow_config(method);
    run.kernel = build_kernel(cfg, method, p);
    const FeatureMap& map = p.map ? *p.map : FeatureMap::gaussian_quadratic(cfg.data.dim);
    auto observer = [&](const FlowSnapshot& snap) {
      run.snapshots.push_back(Snapshot{snap.iteration, snap.t, snap.particles.points});
      run.metrics.push_back(MetricsRow{snap.iteration, snap.t, snap.diagnostics.mmd.value_or(0.0),
                                       snap.diagnostics.drift_norm, snap.diagnostics.residual});
    };
    auto metric = [&](const ParticleSet& x) { return mmd(reference, x).value; };
    run.final = run_flow(method, map, run.kernel, p.targets, p.init, run.flow, observer, metric);
    run.summary = summarize(cfg, p, run);
    result.runs.push_back(std::move(run));
  }
  result.seeds = std::move(p.seeds);
  result.data = std::move(p.data);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_particles_csv(const MethodRun& run, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  const Index d = run.final.dim();
  out << "iteration,t,index";
  for (Index c = 0; c < d; ++c) out << ",x" << c;
  out << '\n';
  for (const Snapshot& s : run.snapshots) {
    for (Index i = 0; i < s.points.rows(); ++i) {
      out << s.iteration << ',' << fmt(s.t) << ',' << i;
      for (Index c = 0; c < d; ++c) out << ',' << fmt(s.points(i, c));
      out << '\n';
    }
  }
}

void write_metrics_csv(const MethodRun& run, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "iteration,t,mmd,drift_norm,residual\n";
  for (const MetricsRow& r : run.metrics) {
    out << r.iteration << ',' << fmt(r.t) << ',' << fmt(r.mmd) << ',' << fmt(r.drift_norm) << ',';
    if (r.residual) out << fmt(*r.residual);
    out << '\n';
  }
}

Json run_json(const ScenarioResult& result) {
  Json runs = Json::object();
  for (const MethodRun& r : result.runs) {
    runs[to_string(r.method)] = Json{{"flow", to_json(r.flow)},
                                     {"kernel", to_json(r.kernel)},
                                     {"results", r.summary}};
  }
  return Json{{"config", to_json(result.config)},
              {"seeds", result.seeds},
              {"feature_map", result.map ? to_json(*result.map) : Json()},
              {"data", result.data},
              {"runs", std::move(runs)},
              {"versions",
               {{"kingflow", kVersion},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)}}},
              {"wall_clock_seconds", result.seconds}};
}

void write_outputs(const ScenarioResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const MethodRun& r : result.runs) {
    const auto sub = dir / to_string(r.method);
    std::filesystem::create_directories(sub);
    write_particles_csv(r, sub / "particles.csv");
    write_metrics_csv(r, sub / "metrics.csv");
  }
  std::ofstream out(dir / "run.json");
  if (!out) throw Error("cannot write '" + (dir / "run.json").string() + "'");
  out << run_json(result).dump(2) << '\n';
}

ScenarioResult run_scenario(const RunConfig& cfg) {
  ScenarioResult result = execute_scenario(cfg);
  write_outputs(result, cfg.output);
  return result;
}

ParticleSet read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::vector<double> iteration_of_row;
  std::vector<int> keep;
  int iteration_col = -1;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;
      bool header = false;
      try {
        std::size_t used = 0;
        (void)std::stod(cells.front(), &used);
        header = used != cells.front().size();
      } catch (const std::exception&) {
        header = true;
      }
      if (header) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
          if (cells[c].size() > 1 && cells[c][0] == 'x') keep.push_back(static_cast<int>(c));
          if (cells[c] == "iteration") iteration_col = static_cast<int>(c);
        }
        if (keep.empty())
          for (std::size_t c = 0; c < cells.size(); ++c) keep.push_back(static_cast<int>(c));
        continue;
      }
    }
    if (keep.empty())
      for (std::size_t c = 0; c < cells.size(); ++c) keep.push_back(static_cast<int>(c));
    std::vector<double> row;
    for (int c : keep) {
      if (c >= static_cast<int>(cells.size()))
        throw InvalidInput("'" + path.string() + "': short row");
      try {
        row.push_back(std::stod(cells[static_cast<std::size_t>(c)]));
      } catch (const std::exception&) {
        throw InvalidInput("'" + path.string() + "': non-numeric cell '" +
                           cells[static_cast<std::size_t>(c)] + "'");
      }
    }
    if (iteration_col >= 0 && !keep.empty())
      iteration_of_row.push_back(std::stod(cells.at(static_cast<std::size_t>(iteration_col))));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput("'" + path.string() + "': no data rows");
  if (!iteration_of_row.empty()) {
    // A trajectory file: keep the last snapshot only.
    const double last = *std::max_element(iteration_of_row.begin(), iteration_of_row.end());
    std::vector<std::vector<double>> tail;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (iteration_of_row[i] == last) tail.push_back(std::move(rows[i]));
    rows = std::move(tail);
  }
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < keep.size(); ++c)
      m(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
  return ParticleSet(std::move(m));
}

void write_points_csv(const ParticleSet& points, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (Index c = 0; c < points.dim(); ++c) out << (c ? "," : "") << 'x' << c;
  out << '\n';
  for (Index i = 0; i < points.size(); ++i) {
    for (Index c = 0; c < points.dim(); ++c) out << (c ? "," : "") << fmt(points.points(i, c));
    out << '\n';
  }
}

}  // namespace kingflow
