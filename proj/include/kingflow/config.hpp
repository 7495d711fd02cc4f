#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kingflow/flows.hpp"
#include "kingflow/serialize.hpp"

namespace kingflow {

enum class Scenario {
  BimodalCompare,
  ManifoldGuidance,
  NgdTracking,
  GraphicalModel,
  CovariateShiftRotation,
  SteinSampling,
};

const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

/// Which sufficient statistic to build; centers and bandwidth are derived
/// from the data at run time.
struct ManifoldConfig {
  FeatureKind kind = FeatureKind::RbfFeatures;
  int centers = 50;
  /// Stein only: add the f = 1 test function.
  bool constant_test = true;
};

/// Kernel used by ntKiNG. KiNG always uses the RBF cross-gradient kernel.
struct KernelConfig {
  KernelKind ntking_kind = KernelKind::EmpiricalNtk;
  int ntk_width = kDefaultNtkWidth;
};

/// Flow settings; a missing ridge falls back to default_ridge(method).
struct FlowSettings {
  double step = 1.0;
  int iterations = 100;
  std::optional<double> ridge;
  double jitter = 1e-6;
  int log_every = 10;
  bool freeze_bandwidth = false;
};

/// Dataset parameters. Fields that do not apply to a scenario are ignored.
struct DataConfig {
  int dim = 5;
  int n_particles = 100;
  int n_targets = 100;
  double offset = 2.0;
  std::optional<VectorXd> target_mean;
  std::optional<MatrixXd> target_cov;
  int mc_samples = 4096;
  double edge_prob = 0.3;
  double edge_value = 0.3;
  double threshold = 0.1;
  double degrees = 45.0;
  double cluster_scale = 0.3;
  std::string stein_target = "gaussian";
  double init_mean = 3.0;
};

struct RunConfig {
  Scenario scenario = Scenario::BimodalCompare;
  std::uint64_t seed = 0;
  std::vector<FlowMethod> methods;
  ManifoldConfig manifold;
  KernelConfig kernel;
  FlowSettings flow;
  DataConfig data;
  std::string output = "runs/out";

  /// Scenario defaults; every field can then be overridden from JSON.
  static RunConfig defaults(Scenario s);

  FlowConfig flow_config(FlowMethod method) const;
  void validate() const;
};

/// Ridge used when the config gives none: ntKiNG's NTK Gram is much larger
/// than the Fisher term, so it needs a stronger ridge than KiNG.
double default_ridge(FlowMethod method, KernelKind ntking_kind);

/// Starts from RunConfig::defaults(scenario) and applies the JSON fields.
/// Unknown fields, wrong types and invalid values throw ConfigError.
RunConfig run_config_from_json(const Json& j);
Json to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path);

}  // namespace kingflow
