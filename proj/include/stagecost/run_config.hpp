#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "stagecost/resnet.hpp"
#include "stagecost/training.hpp"

namespace stagecost {

/// Full description of one training run. Parsing is strict: unknown keys are
/// rejected and the loss weights and seed must be spelled out, so every
/// artifact a run produces is unambiguous about how it was made.
struct RunConfig {
  std::string dataset_uri;
  NetworkConfig network;
  TrainConfig train;
  std::string out_dir;    // optional here; the command line may supply it
  int64_t eval_every = 1;

  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace stagecost
