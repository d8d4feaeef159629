#include "stagecost/resnet.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "stagecost/errors.hpp"
#include "stagecost/rng.hpp"

namespace stagecost {

void NetworkConfig::validate() const {
  if (depth < 0) throw ValidationError("depth must be >= 0, got " + std::to_string(depth));
  if (static_cast<int64_t>(widths.size()) != depth + 1) {
    throw ValidationError("widths must list " + std::to_string(depth + 1) +
                          " entries for depth " + std::to_string(depth) + ", got " +
                          std::to_string(widths.size()));
  }
  for (int64_t v : widths) {
    if (v <= 0) throw ValidationError("widths entries must be positive");
  }
  if (input_dim <= 0) throw ValidationError("input_dim must be positive");
  if (num_outputs <= 0) throw ValidationError("num_outputs must be positive");
  if (hidden_multiplier <= 0) throw ValidationError("hidden_multiplier must be positive");
  for (int64_t v : head_chain_widths) {
    if (v <= 0) throw ValidationError("head_chain_widths entries must be positive");
  }
}

std::vector<int64_t> NetworkConfig::skip_indices() const {
  std::vector<int64_t> out;
  for (int64_t k = 0; k + 1 <= depth; ++k) {
    if (widths[static_cast<size_t>(k)] != widths[static_cast<size_t>(k + 1)]) out.push_back(k);
  }
  return out;
}

bool NetworkConfig::homogeneous() const {
  for (size_t k = 0; k + 1 < widths.size(); ++k) {
    if (widths[k] != widths[k + 1]) return false;
  }
  return true;
}

int64_t NetworkConfig::head_input_dim() const {
  return head_chain_widths.empty() ? widths.back() : head_chain_widths.back();
}

namespace {

template <typename View, typename WB>
std::vector<View> walk_params(WB& w) {
  std::vector<View> out;
  auto add = [&out](auto& t, ParamGroup g, std::string name) {
    out.push_back(View{&t, g, std::move(name)});
  };
  add(w.embed.W, ParamGroup::kBackbone, "stem.W");
  add(w.embed.b, ParamGroup::kBackbone, "stem.b");
  for (size_t k = 0; k < w.blocks.size(); ++k) {
    auto& blk = w.blocks[k];
    std::string p = "block" + std::to_string(k);
    add(blk.fc1.W, ParamGroup::kBackbone, p + ".fc1.W");
    add(blk.fc1.b, ParamGroup::kBackbone, p + ".fc1.b");
    add(blk.fc2.W, ParamGroup::kBackbone, p + ".fc2.W");
    add(blk.fc2.b, ParamGroup::kBackbone, p + ".fc2.b");
    if (blk.skip) {
      add(blk.skip->W, ParamGroup::kBackbone, p + ".skip.W");
      add(blk.skip->b, ParamGroup::kBackbone, p + ".skip.b");
    }
  }
  for (size_t i = 0; i < w.head_chain.size(); ++i) {
    std::string p = "head_chain" + std::to_string(i);
    add(w.head_chain[i].W, ParamGroup::kBackbone, p + ".W");
    add(w.head_chain[i].b, ParamGroup::kBackbone, p + ".b");
  }
  add(w.head.W, ParamGroup::kBackbone, "head.W");
  add(w.head.b, ParamGroup::kBackbone, "head.b");
  for (size_t k = 0; k < w.exits.size(); ++k) {
    auto& e = w.exits[k];
    std::string p = "exit" + std::to_string(k);
    for (size_t i = 0; i < e.chain.size(); ++i) {
      std::string q = p + ".chain" + std::to_string(i);
      add(e.chain[i].W, ParamGroup::kExitOnly, q + ".W");
      add(e.chain[i].b, ParamGroup::kExitOnly, q + ".b");
    }
    add(e.head.W, ParamGroup::kExitOnly, p + ".head.W");
    add(e.head.b, ParamGroup::kExitOnly, p + ".head.b");
  }
  return out;
}

Affine zero_affine(int64_t in, int64_t out) {
  return Affine{Tensor::zeros({in, out}), Tensor::zeros({out})};
}

void check_affine(const Affine& a, int64_t in, int64_t out, const std::string& name) {
  std::vector<int64_t> ws = {in, out};
  std::vector<int64_t> bs = {out};
  if (a.W.shape != ws) {
    throw ValidationError(name + ".W expects [" + std::to_string(in) + "x" +
                          std::to_string(out) + "], got " + a.W.shape_str());
  }
  if (a.b.shape != bs) {
    throw ValidationError(name + ".b expects [" + std::to_string(out) + "], got " +
                          a.b.shape_str());
  }
}

// Widths of the shared chain stages feeding an exit at depth k: outputs of
// the remaining projections, then the head-chain stages.
std::vector<int64_t> chain_widths_from(const NetworkConfig& cfg, int64_t k) {
  std::vector<int64_t> out;
  for (int64_t j = k; j < cfg.depth; ++j) {
    if (cfg.has_projection(j)) out.push_back(cfg.widths[static_cast<size_t>(j + 1)]);
  }
  out.insert(out.end(), cfg.head_chain_widths.begin(), cfg.head_chain_widths.end());
  return out;
}

void ensure_finite(const Tensor& t, const std::string& stage) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + stage);
}

}  // namespace

std::vector<ParamView> param_views(WeightBundle& w) { return walk_params<ParamView>(w); }

std::vector<ConstParamView> param_views(const WeightBundle& w) {
  return walk_params<ConstParamView>(w);
}

int64_t param_count(const WeightBundle& w) {
  int64_t n = 0;
  for (const ConstParamView& v : param_views(w)) n += v.tensor->numel();
  return n;
}

WeightBundle init_weights(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  WeightBundle w;
  w.embed = zero_affine(cfg.input_dim, cfg.widths[0]);
  for (int64_t k = 0; k < cfg.depth; ++k) {
    BlockWeights blk;
    int64_t in = cfg.widths[static_cast<size_t>(k)];
    int64_t out = cfg.widths[static_cast<size_t>(k + 1)];
    int64_t hid = cfg.hidden_width(k);
    blk.fc1 = zero_affine(in, hid);
    blk.fc2 = zero_affine(hid, out);
    if (cfg.has_projection(k)) blk.skip = zero_affine(in, out);
    w.blocks.push_back(std::move(blk));
  }
  int64_t chain_in = cfg.widths.back();
  for (int64_t cw : cfg.head_chain_widths) {
    w.head_chain.push_back(zero_affine(chain_in, cw));
    chain_in = cw;
  }
  w.head = zero_affine(cfg.head_input_dim(), cfg.num_outputs);

  // Backbone weights drawn in canonical order; biases stay zero.
  Rng rng(mix_seed(seed, 0x57454947u));
  for (ParamView v : param_views(w)) {
    if (v.tensor->rank() != 2) continue;
    double std_dev = std::sqrt(2.0 / static_cast<double>(v.tensor->rows()));
    for (double& x : v.tensor->values) x = std_dev * rng.normal();
  }

  // Residual branches start closed (fc2 = 0), so the stack begins as an
  // identity map. Without normalization layers, a fully random deep stack
  // doubles its state variance per block and diverges within a few steps.
  for (BlockWeights& blk : w.blocks) {
    for (double& x : blk.fc2.W.values) x = 0.0;
  }

  if (cfg.exit_mode == ExitMode::kExtraParams) {
    for (int64_t k = 0; k < cfg.depth; ++k) {
      ExitWeights e;
      for (int64_t j = k; j < cfg.depth; ++j) {
        if (cfg.has_projection(j)) e.chain.push_back(*w.blocks[static_cast<size_t>(j)].skip);
      }
      for (const Affine& a : w.head_chain) e.chain.push_back(a);
      e.head = w.head;
      w.exits.push_back(std::move(e));
    }
  }
  return w;
}

void validate_weights(const WeightBundle& w, const NetworkConfig& cfg) {
  cfg.validate();
  check_affine(w.embed, cfg.input_dim, cfg.widths[0], "stem");
  if (static_cast<int64_t>(w.blocks.size()) != cfg.depth) {
    throw ValidationError("expected " + std::to_string(cfg.depth) + " blocks, got " +
                          std::to_string(w.blocks.size()));
  }
  for (int64_t k = 0; k < cfg.depth; ++k) {
    const BlockWeights& blk = w.blocks[static_cast<size_t>(k)];
    std::string p = "block" + std::to_string(k);
    int64_t in = cfg.widths[static_cast<size_t>(k)];
    int64_t out = cfg.widths[static_cast<size_t>(k + 1)];
    check_affine(blk.fc1, in, cfg.hidden_width(k), p + ".fc1");
    check_affine(blk.fc2, cfg.hidden_width(k), out, p + ".fc2");
    if (cfg.has_projection(k) != blk.skip.has_value()) {
      throw ValidationError(p + (blk.skip ? " has a projection but keeps its width"
                                          : " changes width but lacks a projection"));
    }
    if (blk.skip) check_affine(*blk.skip, in, out, p + ".skip");
  }
  if (w.head_chain.size() != cfg.head_chain_widths.size()) {
    throw ValidationError("expected " + std::to_string(cfg.head_chain_widths.size()) +
                          " head-chain stages, got " + std::to_string(w.head_chain.size()));
  }
  int64_t chain_in = cfg.widths.back();
  for (size_t i = 0; i < w.head_chain.size(); ++i) {
    check_affine(w.head_chain[i], chain_in, cfg.head_chain_widths[i],
                 "head_chain" + std::to_string(i));
    chain_in = cfg.head_chain_widths[i];
  }
  check_affine(w.head, cfg.head_input_dim(), cfg.num_outputs, "head");
  size_t want_exits =
      cfg.exit_mode == ExitMode::kExtraParams ? static_cast<size_t>(cfg.depth) : 0;
  if (w.exits.size() != want_exits) {
    throw ValidationError("expected " + std::to_string(want_exits) + " exit-parameter sets, got " +
                          std::to_string(w.exits.size()));
  }
  for (size_t k = 0; k < w.exits.size(); ++k) {
    const ExitWeights& e = w.exits[k];
    std::string p = "exit" + std::to_string(k);
    std::vector<int64_t> cw = chain_widths_from(cfg, static_cast<int64_t>(k));
    if (e.chain.size() != cw.size()) {
      throw ValidationError(p + " expects " + std::to_string(cw.size()) + " chain stages, got " +
                            std::to_string(e.chain.size()));
    }
    int64_t in = cfg.widths[k];
    for (size_t i = 0; i < cw.size(); ++i) {
      check_affine(e.chain[i], in, cw[i], p + ".chain" + std::to_string(i));
      in = cw[i];
    }
    check_affine(e.head, in, cfg.num_outputs, p + ".head");
  }
}

double residual_norm_sq(const BlockWeights& blk) {
  double total = 0.0;
  for (const Tensor* t : {&blk.fc1.W, &blk.fc1.b, &blk.fc2.W, &blk.fc2.b}) {
    for (double v : t->values) total += v * v;
  }
  return total;
}

void zero_residual_tail(WeightBundle& w, int64_t from_block) {
  for (size_t k = static_cast<size_t>(from_block); k < w.blocks.size(); ++k) {
    w.blocks[k].fc1.W.fill(0.0);
    w.blocks[k].fc1.b.fill(0.0);
    w.blocks[k].fc2.W.fill(0.0);
    w.blocks[k].fc2.b.fill(0.0);
  }
}

Tensor affine_apply(const Tensor& x, const Affine& a) {
  Tensor y = matmul(x, a.W);
  int64_t cols = y.cols();
  for (int64_t i = 0; i < y.rows(); ++i) {
    double* row = y.values.data() + i * cols;
    for (int64_t j = 0; j < cols; ++j) row[j] += a.b.values[static_cast<size_t>(j)];
  }
  return y;
}

Tensor relu_apply(Tensor x) {
  for (double& v : x.values) v = v > 0.0 ? v : 0.0;
  return x;
}

Tensor embed(const Tensor& x, const WeightBundle& w) {
  return relu_apply(affine_apply(x, w.embed));
}

Tensor block_forward(const Tensor& xk, const BlockWeights& blk, bool projected) {
  Tensor f = affine_apply(relu_apply(affine_apply(xk, blk.fc1)), blk.fc2);
  Tensor out = projected ? affine_apply(xk, *blk.skip) : xk;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += f.values[i];
  return out;
}

Tensor head_output(const Tensor& xN, const WeightBundle& w) {
  Tensor h = xN;
  for (const Affine& a : w.head_chain) h = affine_apply(h, a);
  return affine_apply(h, w.head);
}

Tensor intermediate_output(const Tensor& xk, int64_t k, const WeightBundle& w,
                           const NetworkConfig& cfg) {
  if (k < 0 || k >= cfg.depth) {
    throw ValidationError("exit depth " + std::to_string(k) + " out of range [0, " +
                          std::to_string(cfg.depth) + ")");
  }
  if (cfg.exit_mode == ExitMode::kExtraParams) {
    const ExitWeights& e = w.exits[static_cast<size_t>(k)];
    Tensor h = xk;
    for (const Affine& a : e.chain) h = affine_apply(h, a);
    return affine_apply(h, e.head);
  }
  Tensor h = xk;
  for (int64_t j = k; j < cfg.depth; ++j) {
    if (cfg.has_projection(j)) h = affine_apply(h, *w.blocks[static_cast<size_t>(j)].skip);
  }
  return head_output(h, w);
}

ForwardTrace forward_full(const Tensor& x, const WeightBundle& w, const NetworkConfig& cfg) {
  if (x.rank() != 2 || x.cols() != cfg.input_dim) {
    throw ValidationError("input expects [batch x " + std::to_string(cfg.input_dim) + "], got " +
                          x.shape_str());
  }
  if (x.rows() < 1) throw ValidationError("empty batch");
  ForwardTrace trace;
  trace.states.reserve(static_cast<size_t>(cfg.depth) + 1);
  trace.states.push_back(embed(x, w));
  ensure_finite(trace.states[0], "stem output");
  for (int64_t k = 0; k < cfg.depth; ++k) {
    trace.states.push_back(
        block_forward(trace.states.back(), w.blocks[static_cast<size_t>(k)],
                      cfg.has_projection(k)));
    ensure_finite(trace.states.back(), "state after block " + std::to_string(k));
  }
  trace.exits.reserve(static_cast<size_t>(cfg.depth));
  for (int64_t k = 0; k < cfg.depth; ++k) {
    trace.exits.push_back(intermediate_output(trace.states[static_cast<size_t>(k)], k, w, cfg));
    ensure_finite(trace.exits.back(), "output at depth " + std::to_string(k));
  }
  trace.output = head_output(trace.states.back(), w);
  ensure_finite(trace.output, "final output");
  return trace;
}

}  // namespace stagecost
