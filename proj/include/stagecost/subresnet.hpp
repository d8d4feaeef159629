#pragma once

#include <cstdint>

#include "stagecost/checkpoint.hpp"
#include "stagecost/resnet.hpp"
#include "stagecost/tensor.hpp"
#include "stagecost/training.hpp"

namespace stagecost {

struct SubNetwork {
  NetworkConfig config;
  WeightBundle weights;
};

/// Depth-M child sharing the parent's first M blocks. The child's head is the
/// parent's remaining projection skips followed by the parent's own head
/// chain and head, so its output function equals the parent's depth-M output
/// exactly. With per-depth exit parameters, the depth-M exit becomes the
/// child's head and exits below M carry over; everything deeper is dropped.
SubNetwork extract_subresnet(const WeightBundle& w, const NetworkConfig& cfg, int64_t M);

/// Embed a depth-M child into a depth-N parent: shared blocks are copied,
/// residual branches of blocks >= M are zeroed, and the child's head chain is
/// split back into the parent's projection skips, head chain, and head. The
/// parent's outputs at depths M..N all equal the child's output exactly.
WeightBundle lift(const SubNetwork& child, const NetworkConfig& parent_cfg);

struct IdentityReport {
  bool holds;
  double max_deviation;  // max over depths k in (M, N] of max|y_k - y_M|
};

/// Zero the residual branches at and beyond M on a copy and measure how far
/// the outputs at depths M..N spread on the given batch. The spread is
/// exactly zero whenever the exit parameters match the backbone.
IdentityReport verify_identity_mapping(const WeightBundle& w, const NetworkConfig& cfg,
                                       int64_t M, const Tensor& batch);

/// Standalone child model ready for serialization; metadata carries over.
Model prune(const Model& parent, int64_t M);

/// Smallest M where the loss curve is flat from M on (within a relative
/// tolerance of loss(M)) and every remaining block's output residual is small
/// next to the largest block residual. Returns the full depth when no
/// shallower M qualifies.
int64_t plateau_depth(const TrajectoryRecord& rec, double tolerance);

}  // namespace stagecost
