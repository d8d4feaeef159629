#pragma once

#include <string>

#include <json.hpp>

#include "stagecost/resnet.hpp"
#include "stagecost/training.hpp"

namespace stagecost {

// JSON codec shared by run configs and checkpoint headers. Parsing is strict:
// unknown keys, missing required keys, and type mismatches all throw
// ValidationError with `where` naming the source. Serialization is canonical
// (sorted keys, shortest float repr), so emit(parse(x)) is byte-stable.

nlohmann::json network_to_json(const NetworkConfig& cfg);
NetworkConfig network_from_json(const nlohmann::json& j, const std::string& where);

nlohmann::json train_to_json(const TrainConfig& tc);
TrainConfig train_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace stagecost
