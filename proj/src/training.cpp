#include "stagecost/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stagecost/errors.hpp"

namespace stagecost {

void TrainConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ValidationError("gamma must be finite and >= 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("lambda must be finite and >= 0");
  }
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be finite and >= 0");
  if (!(momentum >= 0.0) || momentum > 1.0) {
    throw ValidationError("momentum must lie in [0, 1]");
  }
  for (int64_t m : lr_milestones) {
    if (m < 0) throw ValidationError("lr_milestones must be >= 0");
  }
  if (exit_lr_scale && gamma <= 0.0) {
    throw ValidationError("exit_lr_scale requires gamma > 0 (exit lr is lr/gamma)");
  }
}

namespace {

TapedAffine reg_affine(Tape& tape, const Affine& a, std::vector<Var>& params) {
  TapedAffine out;
  out.W = tape.param(a.W);
  out.b = tape.param(a.b);
  params.push_back(out.W);
  params.push_back(out.b);
  return out;
}

Var taped_affine(Tape& tape, Var x, const TapedAffine& a) {
  return tape.add_bias(tape.matmul(x, a.W), a.b);
}

// Sum of squares over the residual branch of one taped block, accumulated
// in the canonical W1, b1, W2, b2 order.
Var taped_branch_norm_sq(Tape& tape, const TapedBlock& blk) {
  Var s = tape.sum_squares(blk.fc1.W);
  s = tape.add(s, tape.sum_squares(blk.fc1.b));
  s = tape.add(s, tape.sum_squares(blk.fc2.W));
  s = tape.add(s, tape.sum_squares(blk.fc2.b));
  return s;
}

void check_labels(const std::vector<int32_t>& labels, const NetworkConfig& cfg) {
  for (int32_t l : labels) {
    if (l < 0 || l >= cfg.num_outputs) {
      throw ValidationError("label " + std::to_string(l) + " outside [0, " +
                            std::to_string(cfg.num_outputs) + ")");
    }
  }
}

}  // namespace

TapedWeights register_weights(Tape& tape, const WeightBundle& w) {
  TapedWeights tw;
  tw.embed = reg_affine(tape, w.embed, tw.params);
  for (const BlockWeights& blk : w.blocks) {
    TapedBlock tb;
    tb.fc1 = reg_affine(tape, blk.fc1, tw.params);
    tb.fc2 = reg_affine(tape, blk.fc2, tw.params);
    if (blk.skip) tb.skip = reg_affine(tape, *blk.skip, tw.params);
    tw.blocks.push_back(std::move(tb));
  }
  for (const Affine& a : w.head_chain) tw.head_chain.push_back(reg_affine(tape, a, tw.params));
  tw.head = reg_affine(tape, w.head, tw.params);
  for (const ExitWeights& e : w.exits) {
    TapedExit te;
    for (const Affine& a : e.chain) te.chain.push_back(reg_affine(tape, a, tw.params));
    te.head = reg_affine(tape, e.head, tw.params);
    tw.exits.push_back(std::move(te));
  }
  return tw;
}

TapedTrace taped_forward(Tape& tape, const TapedWeights& tw, const NetworkConfig& cfg,
                         const Tensor& x, bool want_exits) {
  TapedTrace trace;
  Var xin = tape.constant(x);
  trace.states.push_back(tape.relu(taped_affine(tape, xin, tw.embed)));
  for (int64_t k = 0; k < cfg.depth; ++k) {
    const TapedBlock& blk = tw.blocks[static_cast<size_t>(k)];
    Var xk = trace.states.back();
    Var f = taped_affine(tape, tape.relu(taped_affine(tape, xk, blk.fc1)), blk.fc2);
    Var s = blk.skip ? taped_affine(tape, xk, *blk.skip) : xk;
    trace.states.push_back(tape.add(s, f));
  }
  auto head_stage = [&](Var h) {
    for (const TapedAffine& a : tw.head_chain) h = taped_affine(tape, h, a);
    return taped_affine(tape, h, tw.head);
  };
  if (want_exits) {
    for (int64_t k = 0; k < cfg.depth; ++k) {
      Var h = trace.states[static_cast<size_t>(k)];
      if (cfg.exit_mode == ExitMode::kExtraParams) {
        const TapedExit& e = tw.exits[static_cast<size_t>(k)];
        for (const TapedAffine& a : e.chain) h = taped_affine(tape, h, a);
        trace.exits.push_back(taped_affine(tape, h, e.head));
      } else {
        for (int64_t j = k; j < cfg.depth; ++j) {
          if (cfg.has_projection(j)) {
            h = taped_affine(tape, h, *tw.blocks[static_cast<size_t>(j)].skip);
          }
        }
        trace.exits.push_back(head_stage(h));
      }
    }
  }
  trace.output = head_stage(trace.states.back());
  return trace;
}

Var taped_loss(Tape& tape, Var pred, const std::vector<int32_t>& labels,
               const NetworkConfig& cfg) {
  if (cfg.loss_kind == LossKind::kCrossEntropy) {
    return tape.softmax_cross_entropy(pred, labels);
  }
  return tape.l2_loss(pred, tape.constant(one_hot(labels, cfg.num_outputs)));
}

Var taped_objective(Tape& tape, const TapedWeights& tw, const NetworkConfig& cfg,
                    const Tensor& x, const std::vector<int32_t>& labels, double gamma,
                    double lambda) {
  TapedTrace trace = taped_forward(tape, tw, cfg, x, gamma != 0.0);
  Var total;
  if (gamma != 0.0) {
    for (Var e : trace.exits) {
      Var term = tape.scale(taped_loss(tape, e, labels, cfg), gamma);
      total = total.valid() ? tape.add(total, term) : term;
    }
  }
  Var terminal = taped_loss(tape, trace.output, labels, cfg);
  total = total.valid() ? tape.add(total, terminal) : terminal;
  if (lambda != 0.0) {
    double half = 0.5 * lambda;
    for (const TapedBlock& blk : tw.blocks) {
      total = tape.add(total, tape.scale(taped_branch_norm_sq(tape, blk), half));
    }
  }
  return total;
}

ObjectiveBreakdown objective(const WeightBundle& w, const NetworkConfig& cfg, const Tensor& x,
                             const std::vector<int32_t>& labels, double gamma, double lambda) {
  check_labels(labels, cfg);
  Tape tape;
  TapedWeights tw = register_weights(tape, w);
  TapedTrace trace = taped_forward(tape, tw, cfg, x, true);

  std::vector<Var> depth_losses;
  for (Var e : trace.exits) depth_losses.push_back(taped_loss(tape, e, labels, cfg));
  Var terminal = taped_loss(tape, trace.output, labels, cfg);

  // Same accumulation order as taped_objective: gamma terms ascending, then
  // the terminal loss, then the decay terms ascending.
  Var total;
  if (gamma != 0.0) {
    for (Var l : depth_losses) {
      Var term = tape.scale(l, gamma);
      total = total.valid() ? tape.add(total, term) : term;
    }
  }
  total = total.valid() ? tape.add(total, terminal) : terminal;
  std::vector<Var> decay_scaled;
  if (lambda != 0.0) {
    double half = 0.5 * lambda;
    for (const TapedBlock& blk : tw.blocks) {
      Var term = tape.scale(taped_branch_norm_sq(tape, blk), half);
      decay_scaled.push_back(term);
      total = tape.add(total, term);
    }
  }

  ObjectiveBreakdown out;
  out.total = tape.value(total).values[0];
  if (!std::isfinite(out.total)) throw NumericError("non-finite objective");
  for (Var l : depth_losses) out.depth_losses.push_back(tape.value(l).values[0]);
  out.depth_losses.push_back(tape.value(terminal).values[0]);
  for (int64_t k = 0; k < cfg.depth; ++k) {
    if (lambda != 0.0) {
      out.decay_terms.push_back(tape.value(decay_scaled[static_cast<size_t>(k)]).values[0]);
    } else {
      out.decay_terms.push_back(0.0);
    }
  }
  return out;
}

double batch_loss(const Tensor& pred, const std::vector<int32_t>& labels,
                  const NetworkConfig& cfg) {
  int64_t batch = pred.rows();
  int64_t classes = pred.cols();
  if (static_cast<int64_t>(labels.size()) != batch) {
    throw ValidationError("label count does not match batch");
  }
  if (classes != cfg.num_outputs) {
    throw ValidationError("prediction width " + std::to_string(classes) + " vs num_outputs " +
                          std::to_string(cfg.num_outputs));
  }
  if (cfg.loss_kind == LossKind::kCrossEntropy) {
    double total = 0.0;
    for (int64_t i = 0; i < batch; ++i) {
      const double* row = pred.values.data() + i * classes;
      double m = row[0];
      for (int64_t j = 1; j < classes; ++j) m = row[j] > m ? row[j] : m;
      double denom = 0.0;
      for (int64_t j = 0; j < classes; ++j) denom += std::exp(row[j] - m);
      total += (m + std::log(denom)) - row[labels[static_cast<size_t>(i)]];
    }
    return total / static_cast<double>(batch);
  }
  Tensor target = one_hot(labels, classes);
  double total = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    double d = pred.values[i] - target.values[i];
    total += d * d;
  }
  return 0.5 * total / static_cast<double>(pred.numel());
}

int64_t correct_count(const Tensor& pred, const std::vector<int32_t>& labels) {
  int64_t batch = pred.rows();
  int64_t classes = pred.cols();
  int64_t correct = 0;
  for (int64_t i = 0; i < batch; ++i) {
    const double* row = pred.values.data() + i * classes;
    int64_t arg = 0;
    for (int64_t j = 1; j < classes; ++j) {
      if (row[j] > row[arg]) arg = j;
    }
    if (arg == labels[static_cast<size_t>(i)]) ++correct;
  }
  return correct;
}

double batch_accuracy(const Tensor& pred, const std::vector<int32_t>& labels) {
  return static_cast<double>(correct_count(pred, labels)) / static_cast<double>(pred.rows());
}

void sgd_step(WeightBundle& w, const std::vector<Tensor>& grads, SgdState& state,
              double momentum, double lr_backbone, double lr_exit) {
  std::vector<ParamView> views = param_views(w);
  if (grads.size() != views.size()) {
    throw ValidationError("got " + std::to_string(grads.size()) + " gradients for " +
                          std::to_string(views.size()) + " parameters");
  }
  if (state.velocity.empty()) {
    state.velocity.reserve(views.size());
    for (const ParamView& v : views) state.velocity.push_back(Tensor::zeros(v.tensor->shape));
  }
  if (state.velocity.size() != views.size()) {
    throw ValidationError("optimizer state does not match parameter layout");
  }
  for (size_t p = 0; p < views.size(); ++p) {
    Tensor& wt = *views[p].tensor;
    const Tensor& g = grads[p];
    Tensor& v = state.velocity[p];
    if (!g.same_shape(wt)) {
      throw ValidationError("gradient shape mismatch at " + views[p].name);
    }
    double lr = views[p].group == ParamGroup::kExitOnly ? lr_exit : lr_backbone;
    for (size_t i = 0; i < wt.values.size(); ++i) {
      v.values[i] = momentum * v.values[i] + g.values[i];
      wt.values[i] -= lr * v.values[i];
    }
  }
}

double lr_at(int64_t epoch, const TrainConfig& tc) {
  double lr = tc.lr;
  for (int64_t m : tc.lr_milestones) {
    if (m <= epoch) lr /= 10.0;
  }
  return lr;
}

TrajectoryRecord evaluate_trajectory(const WeightBundle& w, const NetworkConfig& cfg,
                                     const Dataset& ds) {
  validate_weights(w, cfg);
  if (ds.dim() != cfg.input_dim) {
    throw ValidationError("dataset input_dim " + std::to_string(ds.dim()) +
                          " but network expects input_dim " + std::to_string(cfg.input_dim));
  }
  check_labels(ds.labels, cfg);
  int64_t n = ds.size();
  int64_t depth = cfg.depth;

  std::vector<double> loss_sum(static_cast<size_t>(depth) + 1, 0.0);
  std::vector<int64_t> correct_sum(static_cast<size_t>(depth) + 1, 0);
  std::vector<double> resid_sum(static_cast<size_t>(depth), 0.0);

  const int64_t eval_bs = 256;
  for (int64_t start = 0; start < n; start += eval_bs) {
    int64_t stop = std::min(n, start + eval_bs);
    int64_t bn = stop - start;
    std::vector<int64_t> idx(static_cast<size_t>(bn));
    for (int64_t i = 0; i < bn; ++i) idx[static_cast<size_t>(i)] = start + i;
    Tensor x = gather_rows(ds.features, idx);
    std::vector<int32_t> labels = gather_labels(ds.labels, idx);

    ForwardTrace trace = forward_full(x, w, cfg);
    for (int64_t k = 0; k <= depth; ++k) {
      const Tensor& pred = k < depth ? trace.exits[static_cast<size_t>(k)] : trace.output;
      loss_sum[static_cast<size_t>(k)] +=
          batch_loss(pred, labels, cfg) * static_cast<double>(bn);
      correct_sum[static_cast<size_t>(k)] += correct_count(pred, labels);
    }
    for (int64_t k = 0; k < depth; ++k) {
      const Tensor& a = trace.exits[static_cast<size_t>(k)];
      const Tensor& b = k + 1 < depth ? trace.exits[static_cast<size_t>(k + 1)] : trace.output;
      int64_t cols = a.cols();
      for (int64_t i = 0; i < bn; ++i) {
        double sq = 0.0;
        const double* ra = a.values.data() + i * cols;
        const double* rb = b.values.data() + i * cols;
        for (int64_t j = 0; j < cols; ++j) {
          double d = rb[j] - ra[j];
          sq += d * d;
        }
        resid_sum[static_cast<size_t>(k)] += std::sqrt(sq);
      }
    }
  }

  TrajectoryRecord rec;
  rec.depth = depth;
  rec.split = ds.split;
  for (int64_t k = 0; k <= depth; ++k) {
    rec.losses.push_back(loss_sum[static_cast<size_t>(k)] / static_cast<double>(n));
    rec.accuracies.push_back(static_cast<double>(correct_sum[static_cast<size_t>(k)]) /
                             static_cast<double>(n));
  }
  for (int64_t k = 0; k < depth; ++k) {
    rec.param_norms_sq.push_back(residual_norm_sq(w.blocks[static_cast<size_t>(k)]));
    rec.residual_norms.push_back(resid_sum[static_cast<size_t>(k)] / static_cast<double>(n));
  }
  return rec;
}

TrainResult train(const NetworkConfig& cfg, const TrainConfig& tc, const Dataset& train_ds,
                  const Dataset& eval_ds, int64_t eval_every, const EpochCallback& on_eval) {
  cfg.validate();
  tc.validate();
  if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
  if (train_ds.size() < 1) throw ValidationError("training dataset is empty");
  if (train_ds.dim() != cfg.input_dim || eval_ds.dim() != cfg.input_dim) {
    throw ValidationError("dataset input_dim " + std::to_string(train_ds.dim()) + "/" +
                          std::to_string(eval_ds.dim()) + " but network expects input_dim " +
                          std::to_string(cfg.input_dim));
  }
  check_labels(train_ds.labels, cfg);
  check_labels(eval_ds.labels, cfg);

  TrainResult result;
  result.weights = init_weights(cfg, tc.seed);
  SgdState state;
  double best_acc = -1.0;

  for (int64_t epoch = 0; epoch < tc.epochs; ++epoch) {
    double lr = lr_at(epoch, tc);
    double lr_exit = tc.exit_lr_scale ? lr / tc.gamma : lr;
    auto slices = batches(train_ds.size(), tc.batch_size, tc.seed, epoch);
    for (size_t bi = 0; bi < slices.size(); ++bi) {
      try {
        Tensor x = gather_rows(train_ds.features, slices[bi]);
        std::vector<int32_t> labels = gather_labels(train_ds.labels, slices[bi]);
        Tape tape;
        TapedWeights tw = register_weights(tape, result.weights);
        Var J = taped_objective(tape, tw, cfg, x, labels, tc.gamma, tc.lambda);
        if (!std::isfinite(tape.value(J).values[0])) {
          throw NumericError("non-finite objective");
        }
        tape.backward(J);
        std::vector<Tensor> grads;
        grads.reserve(tw.params.size());
        for (Var p : tw.params) grads.push_back(tape.grad(p));
        sgd_step(result.weights, grads, state, tc.momentum, lr, lr_exit);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi) + ": " + e.what());
      }
    }

    bool last = epoch + 1 == tc.epochs;
    if ((epoch + 1) % eval_every == 0 || last) {
      TrajectoryRecord train_rec = evaluate_trajectory(result.weights, cfg, train_ds);
      train_rec.epoch = epoch;
      TrajectoryRecord eval_rec = evaluate_trajectory(result.weights, cfg, eval_ds);
      eval_rec.epoch = epoch;
      if (eval_rec.accuracies.back() > best_acc) {
        best_acc = eval_rec.accuracies.back();
        result.best_weights = result.weights;
        result.best_epoch = epoch;
      }
      if (on_eval) on_eval(train_rec, eval_rec);
      result.train_records.push_back(std::move(train_rec));
      result.eval_records.push_back(std::move(eval_rec));
    }
  }
  return result;
}

}  // namespace stagecost
