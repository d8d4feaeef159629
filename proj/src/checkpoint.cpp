#include "stagecost/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "stagecost/config_json.hpp"
#include "stagecost/errors.hpp"
#include "stagecost/fsio.hpp"

namespace stagecost {
namespace {

constexpr char kMagic[4] = {'S', 'C', 'K', 'P'};
constexpr uint8_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& buf, size_t at) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(buf[at + i]);
  return v;
}

uint64_t get_u64(const std::string& buf, size_t at) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(buf[at + i]);
  return v;
}

}  // namespace

std::string training_mode_for(double gamma) {
  return gamma == 0.0 ? "standard" : "stage_cost";
}

void save_model(const Model& m, const std::string& path) {
  m.config.validate();
  validate_weights(m.weights, m.config);

  nlohmann::json header;
  header["dataset_uri"] = m.meta.dataset_uri;
  header["epoch"] = m.meta.epoch;
  header["network"] = network_to_json(m.config);
  header["normalization"] = m.meta.normalization;
  header["train"] = train_to_json(m.meta.train);
  header["training_mode"] = m.meta.training_mode;
  std::string header_bytes = header.dump();

  auto views = param_views(m.weights);
  uint64_t count = 0;
  for (const auto& v : views) count += static_cast<uint64_t>(v.tensor->numel());

  std::string out;
  out.reserve(17 + header_bytes.size() + count * 8);
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  put_u32(out, static_cast<uint32_t>(header_bytes.size()));
  out += header_bytes;
  put_u64(out, count);
  for (const auto& v : views) {
    for (double x : v.tensor->values) put_u64(out, std::bit_cast<uint64_t>(x));
  }

  write_file_atomic(path, out, "checkpoint");
}

Model load_model(const std::string& path) {
  std::string buf = read_file(path, "checkpoint");
  if (buf.size() < 17 || buf.compare(0, 4, kMagic, 4) != 0) {
    throw IoError("not a checkpoint (bad magic): " + path);
  }
  uint8_t version = static_cast<uint8_t>(buf[4]);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " +
                  path);
  }
  size_t at = 9;
  uint32_t header_len = get_u32(buf, 5);
  if (buf.size() < at + header_len + 8) throw IoError("truncated checkpoint: " + path);

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(buf.substr(at, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header: " + path + ": " + e.what());
  }
  at += header_len;

  Model m;
  try {
    m.config = network_from_json(h.at("network"), "checkpoint header");
    m.meta.train = train_from_json(h.at("train"), "checkpoint header");
    m.meta.dataset_uri = h.at("dataset_uri").get<std::string>();
    m.meta.normalization = h.at("normalization").get<std::string>();
    m.meta.training_mode = h.at("training_mode").get<std::string>();
    m.meta.epoch = h.at("epoch").get<int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header: " + path + ": " + e.what());
  }
  m.config.validate();
  m.meta.train.validate();

  uint64_t count = get_u64(buf, at);
  at += 8;
  // Shapes come from the config; the payload must fill them exactly.
  m.weights = init_weights(m.config, 0);
  uint64_t expected = static_cast<uint64_t>(param_count(m.weights));
  if (count != expected) {
    throw IoError("checkpoint payload holds " + std::to_string(count) +
                  " parameters but the config implies " + std::to_string(expected) +
                  ": " + path);
  }
  if (buf.size() < at + count * 8) throw IoError("truncated checkpoint: " + path);
  if (buf.size() > at + count * 8) throw IoError("trailing bytes in checkpoint: " + path);

  for (auto& v : param_views(m.weights)) {
    for (double& x : v.tensor->values) {
      x = std::bit_cast<double>(get_u64(buf, at));
      at += 8;
    }
  }
  return m;
}

}  // namespace stagecost
