#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stagecost/autodiff.hpp"
#include "stagecost/data.hpp"
#include "stagecost/resnet.hpp"
#include "stagecost/tensor.hpp"

namespace stagecost {

struct TrainConfig {
  double gamma = 0.0;      // weight on the per-depth output losses
  double lambda = 0.0;     // decay coefficient on residual-branch parameters
  int64_t epochs = 1;
  int64_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  std::vector<int64_t> lr_milestones;  // epochs at which lr drops by 10x
  uint64_t seed = 0;
  bool exit_lr_scale = false;  // lr/gamma on exit-only parameters

  void validate() const;
};

/// Per-depth metrics of one model on one split. Depth-indexed vectors have
/// N+1 entries (the last is the final output); block-indexed ones have N.
struct TrajectoryRecord {
  int64_t depth = 0;
  std::string split;
  int64_t epoch = -1;  // -1 when not tied to a training epoch
  std::vector<double> losses;
  std::vector<double> accuracies;
  std::vector<double> param_norms_sq;   // residual-branch norms per block
  std::vector<double> residual_norms;   // mean 2-norm of y_{k+1} - y_k per block
};

/// J = gamma*L_0 + ... + gamma*L_{N-1} + L_final + decay_0 + ... + decay_{N-1},
/// accumulated in exactly that term order. depth_losses are the raw L_k;
/// decay_terms carry their lambda/2 weight.
struct ObjectiveBreakdown {
  double total = 0.0;
  std::vector<double> depth_losses;  // N+1, unweighted
  std::vector<double> decay_terms;   // N, (lambda/2)*|w_F,k|^2
};

// Taped mirror of a WeightBundle: same structure, same canonical order.
struct TapedAffine {
  Var W, b;
};
struct TapedBlock {
  TapedAffine fc1, fc2;
  std::optional<TapedAffine> skip;
};
struct TapedExit {
  std::vector<TapedAffine> chain;
  TapedAffine head;
};
struct TapedWeights {
  TapedAffine embed;
  std::vector<TapedBlock> blocks;
  std::vector<TapedAffine> head_chain;
  TapedAffine head;
  std::vector<TapedExit> exits;
  std::vector<Var> params;  // canonical order, parallel to param_views
};

struct TapedTrace {
  std::vector<Var> states;  // x_0..x_N
  std::vector<Var> exits;   // empty unless requested
  Var output;
};

TapedWeights register_weights(Tape& tape, const WeightBundle& w);

/// Graph twin of forward_full; node-for-node the same arithmetic, so taped
/// and plain evaluation of the same weights agree bitwise.
TapedTrace taped_forward(Tape& tape, const TapedWeights& tw, const NetworkConfig& cfg,
                         const Tensor& x, bool want_exits);

/// Loss of one output block under the config's loss kind; labels are class
/// indices (one-hot targets are derived internally for squared error).
Var taped_loss(Tape& tape, Var pred, const std::vector<int32_t>& labels,
               const NetworkConfig& cfg);

/// Builds the training objective on the tape. With gamma == 0 no per-depth
/// nodes are recorded at all, which is what makes a gamma=0 run coincide
/// bitwise with a plain terminal-loss training loop.
Var taped_objective(Tape& tape, const TapedWeights& tw, const NetworkConfig& cfg,
                    const Tensor& x, const std::vector<int32_t>& labels, double gamma,
                    double lambda);

/// Objective with per-term values for one batch (tape-backed, so totals
/// match the trainer's bitwise).
ObjectiveBreakdown objective(const WeightBundle& w, const NetworkConfig& cfg, const Tensor& x,
                             const std::vector<int32_t>& labels, double gamma, double lambda);

/// Mean loss of predictions against labels, same arithmetic as the taped
/// losses (shared kernels, ascending-row accumulation).
double batch_loss(const Tensor& pred, const std::vector<int32_t>& labels,
                  const NetworkConfig& cfg);

/// Rows whose argmax matches the label; ties resolve to the lowest index.
int64_t correct_count(const Tensor& pred, const std::vector<int32_t>& labels);

/// correct_count / batch.
double batch_accuracy(const Tensor& pred, const std::vector<int32_t>& labels);

struct SgdState {
  std::vector<Tensor> velocity;  // parallel to canonical params; starts empty
};

/// Heavy-ball update v <- mu*v + g, w <- w - lr*v. Exit-only parameters use
/// lr_exit, everything else lr_backbone.
void sgd_step(WeightBundle& w, const std::vector<Tensor>& grads, SgdState& state,
              double momentum, double lr_backbone, double lr_exit);

/// lr / 10^(milestones passed); a milestone equal to the epoch counts.
double lr_at(int64_t epoch, const TrainConfig& tc);

struct TrainResult {
  WeightBundle weights;
  std::vector<TrajectoryRecord> train_records;
  std::vector<TrajectoryRecord> eval_records;
  int64_t best_epoch = -1;      // epoch of best_weights
  WeightBundle best_weights;    // highest held-out final-depth accuracy
};

using EpochCallback =
    std::function<void(const TrajectoryRecord& train_rec, const TrajectoryRecord& eval_rec)>;

/// Full training loop: seeded init, seeded shuffles, serial reductions.
/// Identical configs and seeds give bitwise-identical weights. A non-finite
/// objective aborts with the epoch/batch coordinates. Evaluates both splits
/// every eval_every epochs (always including the last) and reports each
/// evaluation through on_eval when given.
TrainResult train(const NetworkConfig& cfg, const TrainConfig& tc, const Dataset& train_ds,
                  const Dataset& eval_ds, int64_t eval_every = 1,
                  const EpochCallback& on_eval = nullptr);

/// Per-depth losses, accuracies, parameter norms and output-residual norms
/// on one split; deterministic batched evaluation in dataset order.
TrajectoryRecord evaluate_trajectory(const WeightBundle& w, const NetworkConfig& cfg,
                                     const Dataset& ds);

}  // namespace stagecost
