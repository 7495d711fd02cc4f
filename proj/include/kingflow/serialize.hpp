#pragma once

#include <json.hpp>

#include "kingflow/flows.hpp"
#include "kingflow/kernels.hpp"
#include "kingflow/manifold.hpp"
#include "kingflow/stein.hpp"

namespace kingflow {

using Json = nlohmann::json;

Json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const Json& j);

/// Network weights are not stored; they are redrawn from the seed.
Json to_json(const NtkSpec& spec);
NtkSpec ntk_from_json(const Json& j);

Json to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const Json& j);

Json to_json(const TargetScore& score);
TargetScore target_score_from_json(const Json& j);

Json to_json(const FeatureMap& map);
FeatureMap feature_map_from_json(const Json& j);

Json to_json(const FlowConfig& cfg);

/// Throws ConfigError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const char* where);

}  // namespace kingflow
