#include "stagecost/config_json.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "stagecost/errors.hpp"

namespace stagecost {
namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ValidationError(where + ": unknown key \"" + item.key() + "\"");
    }
  }
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    throw ValidationError(where + ": missing key \"" + std::string(key) + "\"");
  }
  return j.at(key);
}

[[noreturn]] void wrong_type(const char* key, const char* want, const std::string& where) {
  throw ValidationError(where + ": key \"" + std::string(key) + "\" must be " + want);
}

int64_t as_int(const json& v, const char* key, const std::string& where) {
  if (!v.is_number_integer()) wrong_type(key, "an integer", where);
  return v.get<int64_t>();
}

int64_t pull_int(const json& j, const char* key, const std::string& where) {
  return as_int(need(j, key, where), key, where);
}

double pull_double(const json& j, const char* key, const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_number()) wrong_type(key, "a number", where);
  return v.get<double>();
}

std::string pull_string(const json& j, const char* key, const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_string()) wrong_type(key, "a string", where);
  return v.get<std::string>();
}

bool pull_bool(const json& j, const char* key, const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_boolean()) wrong_type(key, "a boolean", where);
  return v.get<bool>();
}

uint64_t pull_seed(const json& j, const char* key, const std::string& where) {
  const json& v = need(j, key, where);
  if (v.is_number_unsigned()) return v.get<uint64_t>();
  if (v.is_number_integer() && v.get<int64_t>() >= 0) {
    return static_cast<uint64_t>(v.get<int64_t>());
  }
  wrong_type(key, "a non-negative integer", where);
}

std::vector<int64_t> int_array(const json& v, const char* key, const std::string& where) {
  if (!v.is_array()) wrong_type(key, "an array of integers", where);
  std::vector<int64_t> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number_integer()) wrong_type(key, "an array of integers", where);
    out.push_back(e.get<int64_t>());
  }
  return out;
}

}  // namespace

json network_to_json(const NetworkConfig& cfg) {
  json j;
  j["depth"] = cfg.depth;
  j["widths"] = cfg.widths;
  j["input_dim"] = cfg.input_dim;
  j["num_outputs"] = cfg.num_outputs;
  j["loss"] = cfg.loss_kind == LossKind::kL2 ? "l2" : "cross_entropy";
  j["exit_mode"] = cfg.exit_mode == ExitMode::kExtraParams ? "extra_params" : "weight_shared";
  j["hidden_multiplier"] = cfg.hidden_multiplier;
  j["head_chain_widths"] = cfg.head_chain_widths;
  return j;
}

NetworkConfig network_from_json(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j,
                 {"depth", "widths", "input_dim", "num_outputs", "loss", "exit_mode",
                  "hidden_multiplier", "head_chain_widths"},
                 where);
  NetworkConfig cfg;
  cfg.depth = pull_int(j, "depth", where);
  cfg.widths = int_array(need(j, "widths", where), "widths", where);
  cfg.input_dim = pull_int(j, "input_dim", where);
  cfg.num_outputs = pull_int(j, "num_outputs", where);

  std::string loss = j.contains("loss") ? pull_string(j, "loss", where) : "cross_entropy";
  if (loss == "cross_entropy") {
    cfg.loss_kind = LossKind::kCrossEntropy;
  } else if (loss == "l2") {
    cfg.loss_kind = LossKind::kL2;
  } else {
    throw ValidationError(where + ": loss must be \"cross_entropy\" or \"l2\", got \"" +
                          loss + "\"");
  }

  std::string mode =
      j.contains("exit_mode") ? pull_string(j, "exit_mode", where) : "weight_shared";
  if (mode == "weight_shared") {
    cfg.exit_mode = ExitMode::kWeightShared;
  } else if (mode == "extra_params") {
    cfg.exit_mode = ExitMode::kExtraParams;
  } else {
    throw ValidationError(where + ": exit_mode must be \"weight_shared\" or " +
                          "\"extra_params\", got \"" + mode + "\"");
  }

  if (j.contains("hidden_multiplier")) {
    cfg.hidden_multiplier = pull_int(j, "hidden_multiplier", where);
  }
  if (j.contains("head_chain_widths")) {
    cfg.head_chain_widths =
        int_array(j.at("head_chain_widths"), "head_chain_widths", where);
  }
  return cfg;
}

json train_to_json(const TrainConfig& tc) {
  json j;
  j["gamma"] = tc.gamma;
  j["lambda"] = tc.lambda;
  j["epochs"] = tc.epochs;
  j["batch_size"] = tc.batch_size;
  j["lr"] = tc.lr;
  j["momentum"] = tc.momentum;
  j["lr_milestones"] = tc.lr_milestones;
  j["seed"] = tc.seed;
  j["exit_lr_scale"] = tc.exit_lr_scale;
  return j;
}

TrainConfig train_from_json(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j,
                 {"gamma", "lambda", "epochs", "batch_size", "lr", "momentum",
                  "lr_milestones", "seed", "exit_lr_scale"},
                 where);
  TrainConfig tc;
  tc.gamma = pull_double(j, "gamma", where);
  tc.lambda = pull_double(j, "lambda", where);
  tc.epochs = pull_int(j, "epochs", where);
  tc.batch_size = pull_int(j, "batch_size", where);
  tc.lr = pull_double(j, "lr", where);
  tc.momentum = pull_double(j, "momentum", where);
  tc.lr_milestones = int_array(need(j, "lr_milestones", where), "lr_milestones", where);
  tc.seed = pull_seed(j, "seed", where);
  tc.exit_lr_scale = pull_bool(j, "exit_lr_scale", where);
  return tc;
}

}  // namespace stagecost
