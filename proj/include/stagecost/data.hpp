#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stagecost/tensor.hpp"

namespace stagecost {

/// Immutable labeled sample set. Features are already normalized per the
/// scheme named in `normalization` ("mnist" or "none"); checkpoints record
/// the scheme so evaluation preprocesses identically.
struct Dataset {
  Tensor features;                // [n, d]
  std::vector<int32_t> labels;    // n class indices
  int64_t num_classes = 0;
  std::string split;              // "train" or "test"
  std::string normalization;
  std::string uri;                // source descriptor, replayable

  int64_t size() const { return features.rank() == 2 ? features.rows() : 0; }
  int64_t dim() const { return features.rank() == 2 ? features.cols() : 0; }
};

/// Parses a big-endian IDX image/label file pair. Pixels are scaled to
/// [0,1] and standardized with the fixed constants mean 0.1307, std 0.3081;
/// images are flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split);

/// Inverse of load_idx for byte-backed features; refuses datasets whose
/// de-normalized values are not within 0.5 of an integer in [0, 255].
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path);

/// Gaussian clusters around seeded random centers. Samples interleave the
/// classes (index i*classes + c has class c), so every prefix is balanced.
Dataset synth_blobs(int64_t classes, int64_t per_class, int64_t dim, double spread,
                    uint64_t seed, const std::string& split);

/// Seeded index permutation sliced into batches; the last partial batch is
/// kept. A given (seed, epoch) always yields the same order.
std::vector<std::vector<int64_t>> batches(int64_t n, int64_t batch_size, uint64_t seed,
                                          int64_t epoch);
std::vector<std::vector<int64_t>> batches(const Dataset& ds, int64_t batch_size, uint64_t seed,
                                          int64_t epoch);

/// Materializes a dataset from a descriptor:
///   blobs://classes/per_class/dim/spread/seed
///   mnist://directory        (canonical MNIST filenames, chosen by split)
Dataset open_dataset(const std::string& uri, const std::string& split);

/// First n samples (n past the end is clamped).
Dataset take_prefix(const Dataset& ds, int64_t n);

/// Rows of features gathered by index.
Tensor gather_rows(const Tensor& features, const std::vector<int64_t>& idx);
std::vector<int32_t> gather_labels(const std::vector<int32_t>& labels,
                                   const std::vector<int64_t>& idx);

/// [n, classes] one-hot targets for squared-error training.
Tensor one_hot(const std::vector<int32_t>& labels, int64_t num_classes);

}  // namespace stagecost
