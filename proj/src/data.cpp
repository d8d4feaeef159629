#include "stagecost/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stagecost/errors.hpp"
#include "stagecost/rng.hpp"

namespace stagecost {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803u;
constexpr uint32_t kLabelsMagic = 0x00000801u;
constexpr double kPixelMean = 0.1307;
constexpr double kPixelStd = 0.3081;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path);
  return bytes;
}

uint32_t read_u32_be(const std::vector<unsigned char>& b, size_t off, const std::string& path) {
  if (off + 4 > b.size()) throw IoError("truncated header in " + path);
  return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
         (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

void write_u32_be(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex_magic(uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

double normalize_pixel(unsigned char b) {
  return (static_cast<double>(b) / 255.0 - kPixelMean) / kPixelStd;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split) {
  std::vector<unsigned char> img = read_file(images_path);
  uint32_t magic = read_u32_be(img, 0, images_path);
  if (magic != kImagesMagic) {
    throw IoError(images_path + ": expected image magic " + hex_magic(kImagesMagic) + ", got " +
                  hex_magic(magic));
  }
  uint32_t count = read_u32_be(img, 4, images_path);
  uint32_t rows = read_u32_be(img, 8, images_path);
  uint32_t cols = read_u32_be(img, 12, images_path);
  size_t need = 16 + static_cast<size_t>(count) * rows * cols;
  if (img.size() < need) {
    throw IoError(images_path + ": truncated, expected " + std::to_string(need) + " bytes, got " +
                  std::to_string(img.size()));
  }

  std::vector<unsigned char> lab = read_file(labels_path);
  uint32_t lmagic = read_u32_be(lab, 0, labels_path);
  if (lmagic != kLabelsMagic) {
    throw IoError(labels_path + ": expected label magic " + hex_magic(kLabelsMagic) + ", got " +
                  hex_magic(lmagic));
  }
  uint32_t lcount = read_u32_be(lab, 4, labels_path);
  if (lcount != count) {
    throw IoError("image/label count mismatch: " + std::to_string(count) + " images vs " +
                  std::to_string(lcount) + " labels");
  }
  if (lab.size() < 8 + static_cast<size_t>(lcount)) {
    throw IoError(labels_path + ": truncated label payload");
  }
  if (count == 0) throw IoError(images_path + ": empty dataset");

  int64_t n = count;
  int64_t d = static_cast<int64_t>(rows) * cols;
  Dataset ds;
  ds.features = Tensor::zeros({n, d});
  for (size_t i = 0; i < static_cast<size_t>(n) * static_cast<size_t>(d); ++i) {
    ds.features.values[i] = normalize_pixel(img[16 + i]);
  }
  ds.labels.resize(static_cast<size_t>(n));
  int32_t max_label = 0;
  for (int64_t i = 0; i < n; ++i) {
    ds.labels[static_cast<size_t>(i)] = lab[8 + static_cast<size_t>(i)];
    max_label = std::max(max_label, ds.labels[static_cast<size_t>(i)]);
  }
  ds.num_classes = max_label + 1;
  ds.split = split;
  ds.normalization = "mnist";
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  if (ds.normalization != "mnist") {
    throw ValidationError("write_idx requires mnist-normalized (byte-backed) features");
  }
  int64_t n = ds.size();
  int64_t d = ds.dim();
  // 784 keeps the canonical 28x28 header; anything else is written flat.
  uint32_t rows = d == 784 ? 28u : 1u;
  uint32_t cols = static_cast<uint32_t>(d == 784 ? 28 : d);

  std::vector<unsigned char> pixels(static_cast<size_t>(n) * static_cast<size_t>(d));
  for (size_t i = 0; i < pixels.size(); ++i) {
    double b = (ds.features.values[i] * kPixelStd + kPixelMean) * 255.0;
    double r = std::round(b);
    if (!(std::abs(b - r) < 0.5) || r < 0.0 || r > 255.0) {
      throw ValidationError("features are not byte-backed; cannot serialize losslessly");
    }
    pixels[i] = static_cast<unsigned char>(r);
  }

  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  if (!img) throw IoError("cannot write " + images_path);
  write_u32_be(img, kImagesMagic);
  write_u32_be(img, static_cast<uint32_t>(n));
  write_u32_be(img, rows);
  write_u32_be(img, cols);
  img.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!img) throw IoError("write failed on " + images_path);
  img.close();

  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!lab) throw IoError("cannot write " + labels_path);
  write_u32_be(lab, kLabelsMagic);
  write_u32_be(lab, static_cast<uint32_t>(n));
  for (int32_t v : ds.labels) {
    unsigned char b = static_cast<unsigned char>(v);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!lab) throw IoError("write failed on " + labels_path);
}

Dataset synth_blobs(int64_t classes, int64_t per_class, int64_t dim, double spread,
                    uint64_t seed, const std::string& split) {
  if (classes < 1 || per_class < 1 || dim < 1 || spread < 0.0) {
    throw ValidationError("synth_blobs arguments must be positive (spread >= 0)");
  }
  // Centers depend on the seed alone so train and test draw from the same
  // clusters; sample noise additionally depends on the split.
  Rng center_rng(mix_seed(seed, 0x43454E54u));
  Tensor centers = Tensor::zeros({classes, dim});
  for (double& v : centers.values) v = 4.0 * center_rng.normal();

  uint64_t split_tag = split == "test" ? 0x54455354u : 0x54524149u;
  Rng noise_rng(mix_seed(seed, split_tag));

  int64_t n = classes * per_class;
  Dataset ds;
  ds.features = Tensor::zeros({n, dim});
  ds.labels.resize(static_cast<size_t>(n));
  int64_t row = 0;
  for (int64_t i = 0; i < per_class; ++i) {
    for (int64_t c = 0; c < classes; ++c, ++row) {
      double* dst = ds.features.values.data() + row * dim;
      const double* center = centers.values.data() + c * dim;
      for (int64_t j = 0; j < dim; ++j) dst[j] = center[j] + spread * noise_rng.normal();
      ds.labels[static_cast<size_t>(row)] = static_cast<int32_t>(c);
    }
  }
  ds.num_classes = classes;
  ds.split = split;
  ds.normalization = "none";
  std::ostringstream uri;
  uri << "blobs://" << classes << "/" << per_class << "/" << dim << "/" << spread << "/" << seed;
  ds.uri = uri.str();
  return ds;
}

std::vector<std::vector<int64_t>> batches(int64_t n, int64_t batch_size, uint64_t seed,
                                          int64_t epoch) {
  if (n < 1) throw ValidationError("cannot batch an empty dataset");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x42415443u ^ static_cast<uint64_t>(epoch) * 0x9E3779B97F4A7C15ULL));
  rng.shuffle(idx);
  std::vector<std::vector<int64_t>> out;
  for (int64_t start = 0; start < n; start += batch_size) {
    int64_t stop = std::min(n, start + batch_size);
    out.emplace_back(idx.begin() + start, idx.begin() + stop);
  }
  return out;
}

std::vector<std::vector<int64_t>> batches(const Dataset& ds, int64_t batch_size, uint64_t seed,
                                          int64_t epoch) {
  return batches(ds.size(), batch_size, seed, epoch);
}

Dataset open_dataset(const std::string& uri, const std::string& split) {
  if (split != "train" && split != "test") {
    throw ValidationError("split must be train or test, got \"" + split + "\"");
  }
  auto scheme_end = uri.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("dataset uri \"" + uri + "\" lacks a scheme");
  }
  std::string scheme = uri.substr(0, scheme_end);
  std::string rest = uri.substr(scheme_end + 3);

  if (scheme == "blobs") {
    std::vector<std::string> parts;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, '/')) parts.push_back(item);
    if (parts.size() != 5) {
      throw ValidationError("blobs uri expects classes/per_class/dim/spread/seed, got \"" + rest +
                            "\"");
    }
    try {
      int64_t classes = std::stoll(parts[0]);
      int64_t per_class = std::stoll(parts[1]);
      int64_t dim = std::stoll(parts[2]);
      double spread = std::stod(parts[3]);
      uint64_t seed = std::stoull(parts[4]);
      Dataset ds = synth_blobs(classes, per_class, dim, spread, seed, split);
      ds.uri = uri;
      return ds;
    } catch (const std::invalid_argument&) {
      throw ValidationError("malformed blobs uri \"" + uri + "\"");
    } catch (const std::out_of_range&) {
      throw ValidationError("malformed blobs uri \"" + uri + "\"");
    }
  }
  if (scheme == "mnist") {
    std::string dir = rest;
    if (!dir.empty() && dir.back() == '/') dir.pop_back();
    std::string prefix = split == "train" ? "train" : "t10k";
    Dataset ds = load_idx(dir + "/" + prefix + "-images-idx3-ubyte",
                          dir + "/" + prefix + "-labels-idx1-ubyte", split);
    ds.uri = uri;
    return ds;
  }
  throw ValidationError("unknown dataset scheme \"" + scheme + "\"");
}

Dataset take_prefix(const Dataset& ds, int64_t n) {
  int64_t keep = std::min(n, ds.size());
  if (keep < 1) throw ValidationError("cannot take an empty prefix");
  Dataset out;
  out.features = Tensor({keep, ds.dim()},
                        std::vector<double>(ds.features.values.begin(),
                                            ds.features.values.begin() + keep * ds.dim()));
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + keep);
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  out.normalization = ds.normalization;
  out.uri = ds.uri;
  return out;
}

Tensor gather_rows(const Tensor& features, const std::vector<int64_t>& idx) {
  int64_t d = features.cols();
  Tensor out = Tensor::zeros({static_cast<int64_t>(idx.size()), d});
  for (size_t i = 0; i < idx.size(); ++i) {
    const double* src = features.values.data() + idx[i] * d;
    std::copy(src, src + d, out.values.data() + static_cast<int64_t>(i) * d);
  }
  return out;
}

std::vector<int32_t> gather_labels(const std::vector<int32_t>& labels,
                                   const std::vector<int64_t>& idx) {
  std::vector<int32_t> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = labels[static_cast<size_t>(idx[i])];
  return out;
}

Tensor one_hot(const std::vector<int32_t>& labels, int64_t num_classes) {
  Tensor out = Tensor::zeros({static_cast<int64_t>(labels.size()), num_classes});
  for (size_t i = 0; i < labels.size(); ++i) {
    out.at(static_cast<int64_t>(i), labels[i]) = 1.0;
  }
  return out;
}

}  // namespace stagecost
