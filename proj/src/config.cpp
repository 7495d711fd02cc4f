#include "kingflow/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace kingflow {

namespace {

struct ScenarioName {
  Scenario scenario;
  const char* name;
};

constexpr ScenarioName kScenarioNames[] = {
    {Scenario::BimodalCompare, "bimodal_compare"},
    {Scenario::ManifoldGuidance, "manifold_guidance"},
    {Scenario::NgdTracking, "ngd_tracking"},
    {Scenario::GraphicalModel, "graphical_model"},
    {Scenario::CovariateShiftRotation, "covariate_shift_rotation"},
    {Scenario::SteinSampling, "stein_sampling"},
};

FeatureKind feature_kind_from_string(const std::string& s) {
  for (auto k : {FeatureKind::GaussianQuadratic, FeatureKind::RbfFeatures,
                 FeatureKind::InformedPairwise, FeatureKind::SteinFeatures})
    if (s == to_string(k)) return k;
  throw ConfigError("manifold: unknown kind '" + s + "'");
}

template <typename T>
void read(const Json& j, const char* key, T& out, const char* where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const Json& j, const char* key, std::optional<T>& out, const char* where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v, where);
  out = v;
}

}  // namespace

const char* to_string(Scenario s) {
  for (const auto& e : kScenarioNames)
    if (e.scenario == s) return e.name;
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  for (const auto& e : kScenarioNames)
    if (name == e.name) return e.scenario;
  throw ConfigError("unknown scenario '" + name + "'");
}

double default_ridge(FlowMethod method, KernelKind ntking_kind) {
  if (method == FlowMethod::NtKing && ntking_kind == KernelKind::EmpiricalNtk) return 3.0;
  return 1e-3;
}

RunConfig RunConfig::defaults(Scenario s) {
  RunConfig c;
  c.scenario = s;
  switch (s) {
    case Scenario::BimodalCompare:
      c.methods = {FlowMethod::King, FlowMethod::NtKing, FlowMethod::Wgf, FlowMethod::MmdFlow};
      break;
    case Scenario::ManifoldGuidance:
      c.methods = {FlowMethod::King};
      c.manifold.kind = FeatureKind::GaussianQuadratic;
      c.data.dim = 1;
      break;
    case Scenario::NgdTracking:
      c.methods = {FlowMethod::King};
      c.manifold.kind = FeatureKind::GaussianQuadratic;
      c.flow.step = 0.05;
      c.flow.ridge = 1e-6;
      c.data.dim = 2;
      c.data.n_particles = 400;
      c.data.n_targets = 400;
      c.data.target_mean = Eigen::Vector2d(2.0, 1.0);
      c.data.target_cov = (MatrixXd(2, 2) << 1.5, 0.5, 0.5, 1.0).finished();
      break;
    case Scenario::GraphicalModel:
      c.methods = {FlowMethod::NtKing};
      c.manifold.kind = FeatureKind::InformedPairwise;
      c.flow.iterations = 30;
      c.flow.log_every = 5;
      c.data.dim = 10;
      c.data.n_particles = 200;
      c.data.n_targets = 200;
      break;
    case Scenario::CovariateShiftRotation:
      c.methods = {FlowMethod::NtKing};
      c.data.dim = 2;
      c.data.n_particles = 200;
      c.data.n_targets = 200;
      break;
    case Scenario::SteinSampling:
      c.methods = {FlowMethod::King};
      c.manifold.kind = FeatureKind::SteinFeatures;
      c.data.dim = 1;
      c.data.n_targets = 0;
      break;
  }
  return c;
}

FlowConfig RunConfig::flow_config(FlowMethod method) const {
  FlowConfig f;
  f.step = flow.step;
  f.iterations = flow.iterations;
  f.ridge = flow.ridge ? *flow.ridge : default_ridge(method, kernel.ntking_kind);
  f.jitter = flow.jitter;
  f.log_every = flow.log_every;
  f.seed = seed;
  f.freeze_bandwidth = flow.freeze_bandwidth;
  return f;
}

void RunConfig::validate() const {
  if (methods.empty()) throw ConfigError("config: at least one method is required");
  for (FlowMethod m : methods) {
    try {
      flow_config(m).validate();
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
  if (manifold.centers < 1) throw ConfigError("config: manifold.centers must be >= 1");
  if (kernel.ntking_kind == KernelKind::RbfScalar)
    throw ConfigError("config: kernel.ntking must be 'ntk' or 'diagonalized'");
  if (kernel.ntk_width < 1) throw ConfigError("config: kernel.ntk_width must be >= 1");
  if (data.dim < 1) throw ConfigError("config: data.dim must be >= 1");
  if (data.n_particles < 2) throw ConfigError("config: data.n_particles must be >= 2");
  if (data.n_targets < 0) throw ConfigError("config: data.n_targets must be >= 0");
  if (scenario != Scenario::SteinSampling && data.n_targets < 2)
    throw ConfigError("config: data.n_targets must be >= 2");
  if (data.edge_prob < 0.0 || data.edge_prob > 1.0)
    throw ConfigError("config: data.edge_prob must be in [0, 1]");
  if (data.mc_samples < 100) throw ConfigError("config: data.mc_samples must be >= 100");
  if (!(data.cluster_scale > 0.0)) throw ConfigError("config: data.cluster_scale must be positive");
  if (data.stein_target != "gaussian" && data.stein_target != "mixture")
    throw ConfigError("config: data.stein_target must be 'gaussian' or 'mixture'");
  if (data.target_mean && data.target_mean->size() != data.dim)
    throw ConfigError("config: data.target_mean has the wrong length");
  if (data.target_cov &&
      (data.target_cov->rows() != data.dim || data.target_cov->cols() != data.dim))
    throw ConfigError("config: data.target_cov has the wrong shape");

  const bool kernel_method = std::any_of(methods.begin(), methods.end(), [](FlowMethod m) {
    return m == FlowMethod::King || m == FlowMethod::NtKing;
  });
  switch (scenario) {
    case Scenario::NgdTracking:
      if (manifold.kind != FeatureKind::GaussianQuadratic)
        throw ConfigError("config: ngd_tracking needs the gaussian_quadratic manifold");
      if (!data.target_mean || !data.target_cov)
        throw ConfigError("config: ngd_tracking needs data.target_mean and data.target_cov");
      break;
    case Scenario::SteinSampling:
      if (manifold.kind != FeatureKind::SteinFeatures)
        throw ConfigError("config: stein_sampling needs the stein manifold");
      for (FlowMethod m : methods)
        if (m != FlowMethod::King && m != FlowMethod::NtKing)
          throw ConfigError("config: stein_sampling supports only king and ntking");
      break;
    case Scenario::CovariateShiftRotation:
      if (data.dim != 2) throw ConfigError("config: covariate_shift_rotation is 2-dimensional");
      break;
    default:
      break;
  }
  if (scenario != Scenario::SteinSampling && manifold.kind == FeatureKind::SteinFeatures)
    throw ConfigError("config: the stein manifold is only used by stein_sampling");
  if (kernel_method && manifold.kind == FeatureKind::InformedPairwise &&
      scenario != Scenario::GraphicalModel)
    throw ConfigError("config: informed_pairwise needs the graphical_model edge list");
}

RunConfig run_config_from_json(const Json& j) {
  reject_unknown_keys(j, {"scenario", "seed", "methods", "manifold", "kernel", "flow", "data", "output"},
                      "config");
  if (!j.contains("scenario")) throw ConfigError("config: missing field 'scenario'");
  std::string scenario;
  read(j, "scenario", scenario, "config");
  RunConfig c = RunConfig::defaults(scenario_from_string(scenario));
  read(j, "seed", c.seed, "config");
  read(j, "output", c.output, "config");

  if (j.contains("methods")) {
    std::vector<std::string> names;
    read(j, "methods", names, "config");
    c.methods.clear();
    for (const auto& n : names) {
      try {
        c.methods.push_back(flow_method_from_string(n));
      } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
      }
    }
  }

  if (j.contains("manifold")) {
    const Json& m = j.at("manifold");
    reject_unknown_keys(m, {"kind", "centers", "constant_test"}, "manifold");
    if (m.contains("kind")) {
      std::string kind;
      read(m, "kind", kind, "manifold");
      c.manifold.kind = feature_kind_from_string(kind);
    }
    read(m, "centers", c.manifold.centers, "manifold");
    read(m, "constant_test", c.manifold.constant_test, "manifold");
  }

  if (j.contains("kernel")) {
    const Json& k = j.at("kernel");
    reject_unknown_keys(k, {"ntking", "ntk_width"}, "kernel");
    if (k.contains("ntking")) {
      std::string kind;
      read(k, "ntking", kind, "kernel");
      if (kind == "ntk")
        c.kernel.ntking_kind = KernelKind::EmpiricalNtk;
      else if (kind == "diagonalized")
        c.kernel.ntking_kind = KernelKind::DiagonalizedScalar;
      else
        throw ConfigError("kernel: ntking must be 'ntk' or 'diagonalized'");
    }
    read(k, "ntk_width", c.kernel.ntk_width, "kernel");
  }

  if (j.contains("flow")) {
    const Json& f = j.at("flow");
    reject_unknown_keys(f, {"step", "iterations", "ridge", "jitter", "log_every", "freeze_bandwidth"},
                        "flow");
    read(f, "step", c.flow.step, "flow");
    read(f, "iterations", c.flow.iterations, "flow");
    read_optional(f, "ridge", c.flow.ridge, "flow");
    read(f, "jitter", c.flow.jitter, "flow");
    read(f, "log_every", c.flow.log_every, "flow");
    read(f, "freeze_bandwidth", c.flow.freeze_bandwidth, "flow");
  }

  if (j.contains("data")) {
    const Json& d = j.at("data");
    reject_unknown_keys(d,
                        {"dim", "n_particles", "n_targets", "offset", "target_mean", "target_cov",
                         "mc_samples", "edge_prob", "edge_value", "threshold", "degrees",
                         "cluster_scale", "stein_target", "init_mean"},
                        "data");
    read(d, "dim", c.data.dim, "data");
    read(d, "n_particles", c.data.n_particles, "data");
    read(d, "n_targets", c.data.n_targets, "data");
    read(d, "offset", c.data.offset, "data");
    if (d.contains("target_mean"))
      c.data.target_mean = d.at("target_mean").is_null()
                               ? std::nullopt
                               : std::optional<VectorXd>(vector_from_json(d.at("target_mean")));
    if (d.contains("target_cov"))
      c.data.target_cov = d.at("target_cov").is_null()
                              ? std::nullopt
                              : std::optional<MatrixXd>(matrix_from_json(d.at("target_cov")));
    read(d, "mc_samples", c.data.mc_samples, "data");
    read(d, "edge_prob", c.data.edge_prob, "data");
    read(d, "edge_value", c.data.edge_value, "data");
    read(d, "threshold", c.data.threshold, "data");
    read(d, "degrees", c.data.degrees, "data");
    read(d, "cluster_scale", c.data.cluster_scale, "data");
    read(d, "stein_target", c.data.stein_target, "data");
    read(d, "init_mean", c.data.init_mean, "data");
  }

  c.validate();
  return c;
}

Json to_json(const RunConfig& c) {
  Json methods = Json::array();
  for (FlowMethod m : c.methods) methods.push_back(to_string(m));
  Json data{{"dim", c.data.dim},
            {"n_particles", c.data.n_particles},
            {"n_targets", c.data.n_targets},
            {"offset", c.data.offset},
            {"target_mean", c.data.target_mean ? vector_to_json(*c.data.target_mean) : Json()},
            {"target_cov", c.data.target_cov ? matrix_to_json(*c.data.target_cov) : Json()},
            {"mc_samples", c.data.mc_samples},
            {"edge_prob", c.data.edge_prob},
            {"edge_value", c.data.edge_value},
            {"threshold", c.data.threshold},
            {"degrees", c.data.degrees},
            {"cluster_scale", c.data.cluster_scale},
            {"stein_target", c.data.stein_target},
            {"init_mean", c.data.init_mean}};
  return Json{
      {"scenario", to_string(c.scenario)},
      {"seed", c.seed},
      {"methods", std::move(methods)},
      {"manifold",
       {{"kind", to_string(c.manifold.kind)},
        {"centers", c.manifold.centers},
        {"constant_test", c.manifold.constant_test}}},
      {"kernel",
       {{"ntking", c.kernel.ntking_kind == KernelKind::EmpiricalNtk ? "ntk" : "diagonalized"},
        {"ntk_width", c.kernel.ntk_width}}},
      {"flow",
       {{"step", c.flow.step},
        {"iterations", c.flow.iterations},
        {"ridge", c.flow.ridge ? Json(*c.flow.ridge) : Json()},
        {"jitter", c.flow.jitter},
        {"log_every", c.flow.log_every},
        {"freeze_bandwidth", c.flow.freeze_bandwidth}}},
      {"data", std::move(data)},
      {"output", c.output},
  };
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace kingflow
