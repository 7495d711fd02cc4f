#include "kingflow/serialize.hpp"

#include <string>

namespace kingflow {

namespace {

const Json& field(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string(where) + ": missing field '" + key + "'");
  return j.at(key);
}

template <typename T>
T get(const Json& j, const char* key, const char* where) {
  try {
    return field(j, key, where).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

SteinPairing pairing_from_string(const std::string& s) {
  if (s == "round_robin") return SteinPairing::RoundRobin;
  if (s == "full") return SteinPairing::Full;
  throw ConfigError("stein pairing must be 'round_robin' or 'full'");
}

}  // namespace

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError(std::string(where) + ": unknown field '" + item.key() + "'");
  }
}

Json matrix_to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix: expected a nonempty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ConfigError("matrix: rows must be nonempty arrays");
  MatrixXd m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ConfigError("matrix: ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw ConfigError("matrix: entries must be numbers");
      m(static_cast<Index>(i), static_cast<Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

Json vector_to_json(const VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

VectorXd vector_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("vector: expected a nonempty array");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("vector: entries must be numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json to_json(const NtkSpec& spec) {
  return Json{{"input_dim", spec.input_dim()},
              {"hidden_width", spec.hidden_width()},
              {"seed", spec.seed()}};
}

NtkSpec ntk_from_json(const Json& j) {
  reject_unknown_keys(j, {"input_dim", "hidden_width", "seed"}, "ntk");
  const int d = get<int>(j, "input_dim", "ntk");
  const int h = get<int>(j, "hidden_width", "ntk");
  if (d < 1 || h < 1) throw ConfigError("ntk: dimensions must be positive");
  return NtkSpec(d, h, get<std::uint64_t>(j, "seed", "ntk"));
}

Json to_json(const KernelSpec& spec) {
  Json j{{"kind", to_string(spec.kind)}};
  if (spec.kind == KernelKind::EmpiricalNtk)
    j["ntk"] = to_json(*spec.ntk);
  else
    j["bandwidth"] = spec.bandwidth;
  return j;
}

KernelSpec kernel_from_json(const Json& j) {
  reject_unknown_keys(j, {"kind", "bandwidth", "ntk"}, "kernel");
  const auto kind = get<std::string>(j, "kind", "kernel");
  if (kind == to_string(KernelKind::EmpiricalNtk))
    return KernelSpec::empirical_ntk(ntk_from_json(field(j, "ntk", "kernel")));
  const double bw = get<double>(j, "bandwidth", "kernel");
  if (!(bw > 0.0)) throw ConfigError("kernel: bandwidth must be positive");
  if (kind == to_string(KernelKind::RbfScalar)) return KernelSpec::rbf(bw);
  if (kind == to_string(KernelKind::DiagonalizedScalar)) return KernelSpec::diagonalized(bw);
  throw ConfigError("kernel: unknown kind '" + kind + "'");
}

Json to_json(const TargetScore& score) {
  return Json{{"kind", score.kind == TargetScore::Kind::DiagonalGaussian ? "gaussian" : "mixture"},
              {"mean", vector_to_json(score.mean)},
              {"variance", vector_to_json(score.variance)}};
}

TargetScore target_score_from_json(const Json& j) {
  reject_unknown_keys(j, {"kind", "mean", "variance"}, "target score");
  const auto kind = get<std::string>(j, "kind", "target score");
  VectorXd mean = vector_from_json(field(j, "mean", "target score"));
  VectorXd var = vector_from_json(field(j, "variance", "target score"));
  try {
    if (kind == "gaussian") return TargetScore::diagonal_gaussian(std::move(mean), std::move(var));
    if (kind == "mixture") return TargetScore::symmetric_mixture(std::move(mean), std::move(var));
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("target score: kind must be 'gaussian' or 'mixture'");
}

Json to_json(const FeatureMap& map) {
  Json j{{"kind", to_string(map.kind())}};
  switch (map.kind()) {
    case FeatureKind::GaussianQuadratic:
      j["dim"] = map.input_dim();
      break;
    case FeatureKind::RbfFeatures:
    case FeatureKind::InformedPairwise:
      j["centers"] = matrix_to_json(map.centers());
      j["bandwidth"] = map.bandwidth();
      if (map.kind() == FeatureKind::InformedPairwise) {
        Json pairs = Json::array();
        for (const auto& [a, b] : map.pairs()) pairs.push_back(Json::array({a, b}));
        j["pairs"] = std::move(pairs);
      }
      break;
    case FeatureKind::CustomLinear:
      j["weight"] = matrix_to_json(map.weight());
      break;
    case FeatureKind::SteinFeatures: {
      const SteinSpec& s = map.stein_spec();
      j["base"] = to_json(*s.base);
      j["score"] = to_json(s.score);
      j["pairing"] = s.pairing == SteinPairing::Full ? "full" : "round_robin";
      j["constant_test"] = s.constant_test;
      break;
    }
  }
  return j;
}

FeatureMap feature_map_from_json(const Json& j) {
  const auto kind = get<std::string>(j, "kind", "feature map");
  try {
    if (kind == "gaussian_quadratic") {
      reject_unknown_keys(j, {"kind", "dim"}, "feature map");
      return FeatureMap::gaussian_quadratic(get<int>(j, "dim", "feature map"));
    }
    if (kind == "rbf") {
      reject_unknown_keys(j, {"kind", "centers", "bandwidth"}, "feature map");
      return FeatureMap::rbf(matrix_from_json(field(j, "centers", "feature map")),
                             get<double>(j, "bandwidth", "feature map"));
    }
    if (kind == "informed_pairwise") {
      reject_unknown_keys(j, {"kind", "centers", "bandwidth", "pairs"}, "feature map");
      std::vector<std::pair<int, int>> pairs;
      for (const auto& p : field(j, "pairs", "feature map")) {
        if (!p.is_array() || p.size() != 2) throw ConfigError("feature map: pairs must be [i, j]");
        pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
      return FeatureMap::informed_pairwise(matrix_from_json(field(j, "centers", "feature map")),
                                           get<double>(j, "bandwidth", "feature map"),
                                           std::move(pairs));
    }
    if (kind == "custom_linear") {
      reject_unknown_keys(j, {"kind", "weight"}, "feature map");
      return FeatureMap::custom_linear(matrix_from_json(field(j, "weight", "feature map")));
    }
    if (kind == "stein") {
      reject_unknown_keys(j, {"kind", "base", "score", "pairing", "constant_test"}, "feature map");
      return FeatureMap::stein(feature_map_from_json(field(j, "base", "feature map")),
                               target_score_from_json(field(j, "score", "feature map")),
                               pairing_from_string(get<std::string>(j, "pairing", "feature map")),
                               get<bool>(j, "constant_test", "feature map"));
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("feature map: unknown kind '" + kind + "'");
}

Json to_json(const FlowConfig& cfg) {
  return Json{{"step", cfg.step},
              {"iterations", cfg.iterations},
              {"ridge", cfg.ridge},
              {"jitter", cfg.jitter},
              {"log_every", cfg.log_every},
              {"seed", cfg.seed},
              {"freeze_bandwidth", cfg.freeze_bandwidth}};
}

}  // namespace kingflow
