#include "stagecost/subresnet.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "stagecost/errors.hpp"

namespace stagecost {
namespace {

void check_depth(int64_t M, int64_t N) {
  if (M < 0 || M > N) {
    throw ValidationError("subnetwork depth " + std::to_string(M) +
                          " outside [0, " + std::to_string(N) + "]");
  }
}

// Head chain widths of the depth-M child: the parent's projection widths from
// M on, then the parent's existing head chain.
std::vector<int64_t> child_chain_widths(const NetworkConfig& cfg, int64_t M) {
  std::vector<int64_t> out;
  for (int64_t j = M; j < cfg.depth; ++j) {
    if (cfg.has_projection(j)) out.push_back(cfg.widths[static_cast<size_t>(j + 1)]);
  }
  out.insert(out.end(), cfg.head_chain_widths.begin(), cfg.head_chain_widths.end());
  return out;
}

Affine zero_affine(int64_t in, int64_t out) {
  return {Tensor::zeros({in, out}), Tensor::zeros({out})};
}

}  // namespace

SubNetwork extract_subresnet(const WeightBundle& w, const NetworkConfig& cfg, int64_t M) {
  validate_weights(w, cfg);
  check_depth(M, cfg.depth);

  SubNetwork child;
  child.config = cfg;
  child.config.depth = M;
  child.config.widths.assign(cfg.widths.begin(), cfg.widths.begin() + M + 1);
  child.config.head_chain_widths = child_chain_widths(cfg, M);

  child.weights.embed = w.embed;
  child.weights.blocks.assign(w.blocks.begin(), w.blocks.begin() + M);
  if (cfg.exit_mode == ExitMode::kExtraParams && M < cfg.depth) {
    child.weights.head_chain = w.exits[static_cast<size_t>(M)].chain;
    child.weights.head = w.exits[static_cast<size_t>(M)].head;
  } else {
    for (int64_t j = M; j < cfg.depth; ++j) {
      if (cfg.has_projection(j)) {
        child.weights.head_chain.push_back(*w.blocks[static_cast<size_t>(j)].skip);
      }
    }
    child.weights.head_chain.insert(child.weights.head_chain.end(), w.head_chain.begin(),
                                    w.head_chain.end());
    child.weights.head = w.head;
  }
  if (cfg.exit_mode == ExitMode::kExtraParams) {
    child.weights.exits.assign(w.exits.begin(), w.exits.begin() + M);
  }
  return child;
}

WeightBundle lift(const SubNetwork& child, const NetworkConfig& parent_cfg) {
  parent_cfg.validate();
  validate_weights(child.weights, child.config);
  const int64_t M = child.config.depth;
  const int64_t N = parent_cfg.depth;
  check_depth(M, N);

  auto mismatch = [&](const std::string& what) {
    throw ValidationError("child is not a subnetwork of the parent config: " + what);
  };
  for (int64_t k = 0; k <= M; ++k) {
    if (child.config.widths[static_cast<size_t>(k)] !=
        parent_cfg.widths[static_cast<size_t>(k)]) {
      mismatch("widths are not a prefix of the parent's");
    }
  }
  if (child.config.input_dim != parent_cfg.input_dim) mismatch("input_dim differs");
  if (child.config.num_outputs != parent_cfg.num_outputs) mismatch("num_outputs differs");
  if (child.config.hidden_multiplier != parent_cfg.hidden_multiplier) {
    mismatch("hidden_multiplier differs");
  }
  if (child.config.exit_mode != parent_cfg.exit_mode) mismatch("exit_mode differs");
  if (child.config.head_chain_widths != child_chain_widths(parent_cfg, M)) {
    mismatch("head chain does not restore the parent's projections");
  }

  WeightBundle out;
  out.embed = child.weights.embed;
  out.blocks = child.weights.blocks;
  size_t chain_i = 0;
  for (int64_t k = M; k < N; ++k) {
    BlockWeights blk;
    blk.fc1 = zero_affine(parent_cfg.widths[static_cast<size_t>(k)],
                          parent_cfg.hidden_width(k));
    blk.fc2 = zero_affine(parent_cfg.hidden_width(k),
                          parent_cfg.widths[static_cast<size_t>(k + 1)]);
    if (parent_cfg.has_projection(k)) blk.skip = child.weights.head_chain[chain_i++];
    out.blocks.push_back(std::move(blk));
  }
  out.head_chain.assign(child.weights.head_chain.begin() + chain_i,
                        child.weights.head_chain.end());
  out.head = child.weights.head;

  if (parent_cfg.exit_mode == ExitMode::kExtraParams) {
    out.exits = child.weights.exits;
    for (int64_t k = M; k < N; ++k) {
      ExitWeights e;
      for (int64_t j = k; j < N; ++j) {
        if (parent_cfg.has_projection(j)) e.chain.push_back(*out.blocks[static_cast<size_t>(j)].skip);
      }
      e.chain.insert(e.chain.end(), out.head_chain.begin(), out.head_chain.end());
      e.head = out.head;
      out.exits.push_back(std::move(e));
    }
  }
  validate_weights(out, parent_cfg);
  return out;
}

IdentityReport verify_identity_mapping(const WeightBundle& w, const NetworkConfig& cfg,
                                       int64_t M, const Tensor& batch) {
  check_depth(M, cfg.depth);
  WeightBundle z = w;
  zero_residual_tail(z, M);
  ForwardTrace t = forward_full(batch, z, cfg);
  auto at = [&](int64_t k) -> const Tensor& {
    return k < cfg.depth ? t.exits[static_cast<size_t>(k)] : t.output;
  };
  double dev = 0.0;
  for (int64_t k = M + 1; k <= cfg.depth; ++k) {
    dev = std::max(dev, max_abs_diff(at(k), at(M)));
  }
  return {dev == 0.0, dev};
}

Model prune(const Model& parent, int64_t M) {
  SubNetwork child = extract_subresnet(parent.weights, parent.config, M);
  Model out;
  out.config = std::move(child.config);
  out.weights = std::move(child.weights);
  out.meta = parent.meta;
  return out;
}

int64_t plateau_depth(const TrajectoryRecord& rec, double tolerance) {
  if (!std::isfinite(tolerance) || tolerance < 0.0) {
    throw ValidationError("tolerance must be finite and non-negative");
  }
  const int64_t N = rec.depth;
  if (N < 0 || rec.losses.size() != static_cast<size_t>(N) + 1 ||
      rec.residual_norms.size() != static_cast<size_t>(N)) {
    throw ValidationError("trajectory lacks per-depth losses or residual norms");
  }
  double max_res = 0.0;
  for (double r : rec.residual_norms) max_res = std::max(max_res, r);

  for (int64_t M = 0; M <= N; ++M) {
    double ref = rec.losses[static_cast<size_t>(M)];
    double slack = tolerance * (1.0 + std::abs(ref));
    bool ok = true;
    for (int64_t k = M; k <= N && ok; ++k) {
      ok = rec.losses[static_cast<size_t>(k)] <= ref + slack;
    }
    for (int64_t k = M; k < N && ok; ++k) {
      ok = rec.residual_norms[static_cast<size_t>(k)] <= tolerance * max_res;
    }
    if (ok) return M;
  }
  return N;
}

}  // namespace stagecost
