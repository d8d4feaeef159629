#pragma once

#include <cstdint>
#include <string>

#include "stagecost/resnet.hpp"
#include "stagecost/training.hpp"

namespace stagecost {

/// Everything about a trained model besides the weights. The dataset URI and
/// normalization tag travel with the model so later evaluation rebuilds
/// identical preprocessing.
struct ModelMeta {
  std::string dataset_uri;
  std::string normalization = "none";
  std::string training_mode = "standard";  // "standard" or "stage_cost"
  int64_t epoch = -1;                      // last trained epoch, -1 if untrained
  TrainConfig train;                       // snapshot of the producing run
};

struct Model {
  NetworkConfig config;
  WeightBundle weights;
  ModelMeta meta;
};

/// "standard" when the per-depth loss weight is zero, "stage_cost" otherwise.
std::string training_mode_for(double gamma);

/// Binary container: "SCKP" magic, version byte, u32 header length, JSON
/// header, u64 parameter count, then the flat payload as little-endian
/// doubles in canonical parameter order. Writing goes through a temp file
/// and rename. The encoding is canonical: load followed by save reproduces
/// the file byte for byte.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace stagecost
