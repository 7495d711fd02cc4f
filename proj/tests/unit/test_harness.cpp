#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kingflow/scenarios.hpp"

using namespace kingflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_bimodal() {
  auto cfg = RunConfig::defaults(Scenario::BimodalCompare);
  cfg.data.dim = 2;
  cfg.data.n_particles = 30;
  cfg.data.n_targets = 30;
  cfg.manifold.centers = 10;
  cfg.kernel.ntk_width = 8;
  cfg.flow.iterations = 6;
  cfg.flow.log_every = 4;
  return cfg;
}

}  // namespace

TEST_CASE("scenario names round trip") {
  for (auto s : {Scenario::BimodalCompare, Scenario::ManifoldGuidance, Scenario::NgdTracking,
                 Scenario::GraphicalModel, Scenario::CovariateShiftRotation,
                 Scenario::SteinSampling})
    CHECK(scenario_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(scenario_from_string("nope"), ConfigError);
}

TEST_CASE("run config survives a json round trip") {
  auto cfg = RunConfig::defaults(Scenario::NgdTracking);
  cfg.seed = 12;
  cfg.flow.ridge = 0.25;
  cfg.output = "somewhere";
  const Json j = to_json(cfg);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.seed == 12);
  CHECK(*back.flow.ridge == 0.25);
  CHECK(back.data.target_mean->isApprox(*cfg.data.target_mean));

  for (auto s : {Scenario::BimodalCompare, Scenario::GraphicalModel, Scenario::SteinSampling}) {
    const Json js = to_json(RunConfig::defaults(s));
    CHECK(to_json(run_config_from_json(js)) == js);
  }
}

TEST_CASE("sparse configs start from scenario defaults") {
  const auto cfg = run_config_from_json(Json::parse(R"({"scenario": "graphical_model"})"));
  CHECK(cfg.methods == std::vector<FlowMethod>{FlowMethod::NtKing});
  CHECK(cfg.flow.iterations == 30);
}

TEST_CASE("bad configs are rejected") {
  const char* bad[] = {
      R"({"scenario": "bimodal_compare", "colour": 1})",
      R"({"scenario": "bimodal_compare", "flow": {"stepsize": 1}})",
      R"({"scenario": "bimodal_compare", "flow": {"step": -1}})",
      R"({"scenario": "bimodal_compare", "flow": {"iterations": "ten"}})",
      R"({"scenario": "bimodal_compare", "methods": ["sgd"]})",
      R"({"scenario": "unheard_of"})",
      R"([1, 2])",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(run_config_from_json(Json::parse(text)), ConfigError);
  }
}

TEST_CASE("derived seeds differ by stream and are stable") {
  CHECK(derive_seed(1, "targets") == derive_seed(1, "targets"));
  CHECK(derive_seed(1, "targets") != derive_seed(1, "init"));
  CHECK(derive_seed(1, "targets") != derive_seed(2, "targets"));
}

TEST_CASE("scenario outputs are byte-identical across runs") {
  const fs::path root = fs::temp_directory_path() / "kingflow_harness_test";
  fs::remove_all(root);
  const auto cfg = small_bimodal();
  write_outputs(execute_scenario(cfg), root / "a");
  write_outputs(execute_scenario(cfg), root / "b");
  for (const char* m : {"king", "ntking", "wgf", "mmd_flow"})
    for (const char* f : {"particles.csv", "metrics.csv"}) {
      CAPTURE(m);
      CAPTURE(f);
      const std::string a = slurp(root / "a" / m / f);
      CHECK(!a.empty());
      CHECK(a == slurp(root / "b" / m / f));
    }
  CHECK(fs::exists(root / "a" / "run.json"));
  fs::remove_all(root);
}

TEST_CASE("particle snapshots cover every logged iteration") {
  const auto result = execute_scenario(small_bimodal());
  for (const auto& run : result.runs) {
    REQUIRE(run.snapshots.size() == 3);
    CHECK(run.snapshots[0].iteration == 0);
    CHECK(run.snapshots[1].iteration == 4);
    CHECK(run.snapshots[2].iteration == 6);
    for (const auto& s : run.snapshots) {
      CHECK(s.points.rows() == 30);
      CHECK(s.points.allFinite());
    }
  }
  const fs::path dir = fs::temp_directory_path() / "kingflow_rows_test";
  write_outputs(result, dir);
  std::ifstream in(dir / "king" / "particles.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3 * 30);
  const auto last = read_points_csv(dir / "king" / "particles.csv");
  CHECK(last.points == result.run(FlowMethod::King).final.points);
  fs::remove_all(dir);
}

TEST_CASE("run json records the resolved config") {
  const auto result = execute_scenario(small_bimodal());
  const Json j = run_json(result);
  CHECK(j.contains("config"));
  CHECK(j.contains("seeds"));
  CHECK(run_config_from_json(j["config"]).data.n_particles == 30);
}

TEST_CASE("points csv round trip") {
  MatrixXd m(3, 2);
  m << 1.0 / 3.0, -2, 1e-17, 5e20, 0, 7;
  const fs::path p = fs::temp_directory_path() / "kingflow_points.csv";
  write_points_csv(ParticleSet(m), p);
  CHECK(read_points_csv(p).points == m);
  fs::remove(p);
}
