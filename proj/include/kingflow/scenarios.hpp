#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "kingflow/config.hpp"

namespace kingflow {

struct MetricsRow {
  int iteration = 0;
  double t = 0.0;
  double mmd = 0.0;
  double drift_norm = 0.0;
  std::optional<double> residual;
};

struct Snapshot {
  int iteration = 0;
  double t = 0.0;
  MatrixXd points;
};

struct MethodRun {
  FlowMethod method = FlowMethod::King;
  FlowConfig flow;
  KernelSpec kernel;
  std::vector<Snapshot> snapshots;
  std::vector<MetricsRow> metrics;
  ParticleSet final;
  /// Scenario-specific scalar results.
  Json summary;
};

struct ScenarioResult {
  RunConfig config;
  /// The feature map shared by the kernel methods (absent for pure baselines).
  std::optional<FeatureMap> map;
  Json seeds;
  Json data;
  std::vector<MethodRun> runs;
  double seconds = 0.0;

  const MethodRun& run(FlowMethod method) const;
};

/// Sub-seed for a named random stream of one run.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// Runs every configured method in memory. Throws Divergence, StepFailure or
/// SingularMatrix on numerical failure.
ScenarioResult execute_scenario(const RunConfig& cfg);

/// Writes <dir>/run.json and <dir>/<method>/{particles,metrics}.csv.
void write_outputs(const ScenarioResult& result, const std::filesystem::path& dir);

void write_particles_csv(const MethodRun& run, const std::filesystem::path& path);
void write_metrics_csv(const MethodRun& run, const std::filesystem::path& path);
Json run_json(const ScenarioResult& result);

/// execute_scenario followed by write_outputs into cfg.output.
ScenarioResult run_scenario(const RunConfig& cfg);

/// Reads a particle CSV. A header row is skipped; if it names columns
/// x0, x1, ... only those are used, otherwise every column is a coordinate.
ParticleSet read_points_csv(const std::filesystem::path& path);
void write_points_csv(const ParticleSet& points, const std::filesystem::path& path);

}  // namespace kingflow
