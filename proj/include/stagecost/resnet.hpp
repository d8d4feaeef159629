#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stagecost/tensor.hpp"

namespace stagecost {

enum class LossKind { kCrossEntropy, kL2 };
enum class ExitMode { kWeightShared, kExtraParams };

/// Architecture of a dense residual classifier with one output head per
/// depth. Block k maps widths[k] -> widths[k+1]; blocks that change width
/// carry a projection skip, all others use the identity skip.
struct NetworkConfig {
  int64_t depth = 0;                       // number of residual blocks N
  std::vector<int64_t> widths;             // N+1 entries; widths[0] is the stem output
  int64_t input_dim = 0;
  int64_t num_outputs = 0;
  LossKind loss_kind = LossKind::kCrossEntropy;
  ExitMode exit_mode = ExitMode::kWeightShared;
  int64_t hidden_multiplier = 1;           // residual branch hidden width factor
  // Affine stages between x_N and the output head. Empty for nets built from
  // scratch; a pruned child inherits its parent's remaining projection skips
  // here so its output function matches the parent's depth-M head exactly.
  std::vector<int64_t> head_chain_widths;

  void validate() const;

  // Indices of blocks with projection skips, ascending: widths[k] != widths[k+1].
  std::vector<int64_t> skip_indices() const;
  bool has_projection(int64_t k) const { return widths.at(k) != widths.at(k + 1); }
  bool homogeneous() const;

  int64_t hidden_width(int64_t k) const { return hidden_multiplier * widths.at(k + 1); }
  // Input width of the output head: last chain stage, or widths[N] without one.
  int64_t head_input_dim() const;
};

/// y = x·W + b with W[in, out], b[out].
struct Affine {
  Tensor W;
  Tensor b;
};

struct BlockWeights {
  Affine fc1;                    // widths[k] -> hidden
  Affine fc2;                    // hidden -> widths[k+1]
  std::optional<Affine> skip;    // projection, present iff the block changes width
};

/// Private per-depth copy of the skip-chain + head parameters
/// (extra-parameter exits only).
struct ExitWeights {
  std::vector<Affine> chain;
  Affine head;
};

struct WeightBundle {
  Affine embed;
  std::vector<BlockWeights> blocks;   // N
  std::vector<Affine> head_chain;     // parallels config.head_chain_widths
  Affine head;
  std::vector<ExitWeights> exits;     // N entries in extra-params mode, else empty
};

enum class ParamGroup { kBackbone, kExitOnly };

struct ParamView {
  Tensor* tensor;
  ParamGroup group;
  std::string name;
};

struct ConstParamView {
  const Tensor* tensor;
  ParamGroup group;
  std::string name;
};

/// All parameter tensors in canonical order: stem, then per block the
/// residual branch followed by its projection (if any), then head-chain
/// stages, head, and finally per-depth exit copies in ascending depth.
/// Every serialization and optimizer walk uses this order.
std::vector<ParamView> param_views(WeightBundle& w);
std::vector<ConstParamView> param_views(const WeightBundle& w);
int64_t param_count(const WeightBundle& w);

/// He-normal weights (std sqrt(2/fan_in)), zero biases, drawn in canonical
/// order from a single stream. Extra-params exits start as exact copies of
/// the backbone chain/head, so both exit modes begin as the same function.
WeightBundle init_weights(const NetworkConfig& cfg, uint64_t seed);

/// Shape consistency of every tensor against cfg; throws ValidationError
/// naming the offending parameter.
void validate_weights(const WeightBundle& w, const NetworkConfig& cfg);

/// Sum of squares over the residual branch of one block ({W1,b1,W2,b2} only;
/// the projection skip is not part of it).
double residual_norm_sq(const BlockWeights& blk);

/// Zeroes the residual branches of blocks M..N-1 in place. The affected
/// blocks then propagate by skip alone, so outputs at depths >= M coincide.
void zero_residual_tail(WeightBundle& w, int64_t from_block);

struct ForwardTrace {
  std::vector<Tensor> states;   // x_0..x_N
  std::vector<Tensor> exits;    // depth 0..N-1 outputs
  Tensor output;                // depth-N output
};

Tensor embed(const Tensor& x, const WeightBundle& w);
Tensor block_forward(const Tensor& xk, const BlockWeights& blk, bool projected);
/// Chain + head applied to a depth-N state.
Tensor head_output(const Tensor& xN, const WeightBundle& w);
/// Depth-k output from state x_k, 0 <= k < N. Weight-shared exits reuse the
/// backbone projections and head; extra-params exits use their own copies.
Tensor intermediate_output(const Tensor& xk, int64_t k, const WeightBundle& w,
                           const NetworkConfig& cfg);

/// Full pass: all states, all per-depth outputs, final output. Throws
/// NumericError naming the first non-finite stage.
ForwardTrace forward_full(const Tensor& x, const WeightBundle& w, const NetworkConfig& cfg);

Tensor affine_apply(const Tensor& x, const Affine& a);
Tensor relu_apply(Tensor x);

}  // namespace stagecost
