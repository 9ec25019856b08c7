#pragma once

#include <json.hpp>

#include "civae/mlp.hpp"
#include "civae/tensor.hpp"

namespace civae {

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

nlohmann::json mlp_to_json(const models::MlpNet& net);
models::MlpNet mlp_from_json(const nlohmann::json& j);

/// Atomic write: serialize to <path>.tmp then rename.
void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

} // namespace civae
