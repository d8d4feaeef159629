#include "stagecost/run_config.hpp"

#include <set>
#include <string>

#include "stagecost/config_json.hpp"
#include "stagecost/errors.hpp"
#include "stagecost/fsio.hpp"

namespace stagecost {

void RunConfig::validate() const {
  if (dataset_uri.empty()) throw ValidationError("run config: dataset must be non-empty");
  network.validate();
  train.validate();
  if (eval_every < 1) throw ValidationError("run config: eval_every must be >= 1");
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  const std::string where = "run config";
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  const std::set<std::string> known = {"dataset", "network", "train", "out_dir",
                                       "eval_every"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ValidationError(where + ": unknown key \"" + item.key() + "\"");
    }
  }
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) {
      throw ValidationError(where + ": missing key \"" + std::string(key) + "\"");
    }
    return j.at(key);
  };

  RunConfig rc;
  const nlohmann::json& ds = need("dataset");
  if (!ds.is_string()) throw ValidationError(where + ": key \"dataset\" must be a string");
  rc.dataset_uri = ds.get<std::string>();
  rc.network = network_from_json(need("network"), where + ".network");
  rc.train = train_from_json(need("train"), where + ".train");
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) {
      throw ValidationError(where + ": key \"out_dir\" must be a string");
    }
    rc.out_dir = j.at("out_dir").get<std::string>();
  }
  if (j.contains("eval_every")) {
    if (!j.at("eval_every").is_number_integer()) {
      throw ValidationError(where + ": key \"eval_every\" must be an integer");
    }
    rc.eval_every = j.at("eval_every").get<int64_t>();
  }
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::string text = read_file(path, "run config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("run config " + path + " is not valid JSON: " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(e.what()) + " (" + path + ")");
  }
}

}  // namespace stagecost
