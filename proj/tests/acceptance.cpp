// End-to-end acceptance harness. Each criterion prints exactly one PASS or
// FAIL line (plus indented detail) and the process exits 0 only when every
// criterion holds. Criteria re-verify the load-bearing properties of the
// stage-cost objective J = sum_k [gamma*L(y_k) + lambda/2*|w_F,k|^2] + L(y_N)
// from first principles: exact identity mapping under zeroed residual tails,
// bitwise subnetwork extraction, gradients against finite differences,
// closed-form bound identities at lifted feasible points, reduction to plain
// terminal-loss training at gamma=0, and the desk-scale train/prune/audit
// behavior the library exists to provide.

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "stagecost/bounds.hpp"
#include "stagecost/checkpoint.hpp"
#include "stagecost/commands.hpp"
#include "stagecost/data.hpp"
#include "stagecost/resnet.hpp"
#include "stagecost/rng.hpp"
#include "stagecost/subresnet.hpp"
#include "stagecost/tensor.hpp"
#include "stagecost/training.hpp"
#include "stagecost/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace stagecost;

namespace {

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[768];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

struct Crit {
  bool ok = true;
  std::string why;
  std::vector<std::string> info;

  void require(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      why = msg;
    }
  }
  void note(std::string s) { info.push_back(std::move(s)); }
};

// State shared between the desk-scale training criterion and the bound audit
// that reuses its nets.
struct Ctx {
  Dataset shells_train, shells_test;
  Model stage_parent;
  bool have_parent = false;
};

Tensor random_batch(int64_t n, int64_t d, Rng& rng) {
  Tensor t = Tensor::zeros({n, d});
  for (double& v : t.values) v = rng.normal();
  return t;
}

std::vector<int32_t> random_labels(int64_t n, int64_t classes, Rng& rng) {
  std::vector<int32_t> out(static_cast<size_t>(n));
  for (auto& v : out) v = static_cast<int32_t>(rng.below(classes));
  return out;
}

void jitter_weights(WeightBundle& w, Rng& rng, double scale) {
  for (ParamView v : param_views(w)) {
    for (double& x : v.tensor->values) x += scale * rng.normal();
  }
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.values == b.values;
}

bool bundles_equal(const WeightBundle& a, const WeightBundle& b) {
  auto va = param_views(a);
  auto vb = param_views(b);
  if (va.size() != vb.size()) return false;
  for (size_t i = 0; i < va.size(); ++i) {
    if (va[i].tensor->values != vb[i].tensor->values) return false;
  }
  return true;
}

double max_abs_diff_of(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    m = std::max(m, std::abs(a.values[i] - b.values[i]));
  }
  return m;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

// Random small architecture. Stage widths vary when staged=true, otherwise
// one shared width; both exit parameterizations appear.
NetworkConfig random_config(Rng& rng, int64_t max_depth, int64_t max_width, bool staged,
                            ExitMode mode) {
  NetworkConfig cfg;
  cfg.depth = 1 + rng.below(max_depth);
  cfg.widths.resize(static_cast<size_t>(cfg.depth) + 1);
  int64_t shared = 2 + rng.below(max_width - 1);
  for (auto& w : cfg.widths) w = staged ? 2 + rng.below(max_width - 1) : shared;
  cfg.input_dim = 2 + rng.below(6);
  cfg.num_outputs = 2 + rng.below(4);
  cfg.exit_mode = mode;
  cfg.hidden_multiplier = 1 + rng.below(2);
  return cfg;
}

// Concentric spherical shells: class c sits at radius r0 + gap*c with
// additive radial noise. Not linearly separable (every shell surrounds the
// inner ones), yet a handful of residual blocks suffice, so depth beyond the
// needed few carries no function. That is the regime the desk-scale criteria
// probe.
Dataset make_shells(int64_t classes, int64_t per_class, int64_t dim, double r0, double gap,
                    double noise, uint64_t seed, const std::string& split) {
  int64_t n = classes * per_class;
  Dataset ds;
  ds.features = Tensor::zeros({n, dim});
  ds.labels.resize(static_cast<size_t>(n));
  ds.num_classes = classes;
  ds.split = split;
  ds.normalization = "none";
  Rng g(seed);
  std::vector<double> u(static_cast<size_t>(dim));
  for (int64_t i = 0; i < n; ++i) {
    int64_t c = i % classes;
    ds.labels[static_cast<size_t>(i)] = static_cast<int32_t>(c);
    double r = r0 + gap * static_cast<double>(c) + noise * g.normal();
    double norm2 = 0.0;
    for (auto& x : u) {
      x = g.normal();
      norm2 += x * x;
    }
    double s = r / std::sqrt(norm2);
    for (int64_t j = 0; j < dim; ++j) {
      ds.features.values[static_cast<size_t>(i * dim + j)] = u[static_cast<size_t>(j)] * s;
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// 1. Zeroing all residual branches at and beyond a cut depth must leave every
//    deeper output exactly equal to the cut-depth output, for any
//    architecture in the family. Exact, not approximate.
void crit_identity(Ctx&, Crit& c) {
  Rng rng(1001);
  int64_t exact = 0;
  const int64_t cases = 100;
  for (int64_t i = 0; i < cases; ++i) {
    bool shared = (i % 2) == 0;
    NetworkConfig cfg = random_config(rng, 8, 16, (i / 2) % 2 == 1,
                                      shared ? ExitMode::kWeightShared : ExitMode::kExtraParams);
    WeightBundle w = init_weights(cfg, 5000 + static_cast<uint64_t>(i));
    // With a shared head any weights work; with per-depth exit copies the
    // property needs the exits to mirror the backbone, which init provides.
    if (shared) jitter_weights(w, rng, 0.4);
    int64_t M = rng.below(cfg.depth + 1);
    Tensor batch = random_batch(2 + rng.below(5), cfg.input_dim, rng);
    IdentityReport rep = verify_identity_mapping(w, cfg, M, batch);
    if (rep.holds && rep.max_deviation == 0.0) {
      ++exact;
    } else {
      c.require(false, fmt("case %" PRId64 " (depth %" PRId64 ", cut %" PRId64
                           "): deviation %.3e is not exactly zero",
                           i, cfg.depth, M, rep.max_deviation));
    }
  }
  c.note(fmt("%" PRId64 "/%" PRId64 " random configs: max deviation exactly 0", exact, cases));
}

// ---------------------------------------------------------------------------
// 2. A depth-M child extracted from any parent must reproduce the parent's
//    depth-M output bitwise, and lifting it back to full depth must leave
//    every output at or beyond M exactly equal (zero output residuals).
void crit_subnetwork(Ctx&, Crit& c) {
  Rng rng(2002);
  const int64_t cases = 100;
  int64_t exact = 0;
  for (int64_t i = 0; i < cases; ++i) {
    NetworkConfig cfg = random_config(rng, 8, 16, i % 2 == 1,
                                      (i / 2) % 2 == 0 ? ExitMode::kWeightShared
                                                       : ExitMode::kExtraParams);
    WeightBundle w = init_weights(cfg, 7000 + static_cast<uint64_t>(i));
    jitter_weights(w, rng, 0.4);
    int64_t M = rng.below(cfg.depth + 1);
    Tensor batch = random_batch(2 + rng.below(4), cfg.input_dim, rng);

    ForwardTrace parent = forward_full(batch, w, cfg);
    const Tensor& exit_m =
        M < cfg.depth ? parent.exits[static_cast<size_t>(M)] : parent.output;

    SubNetwork child = extract_subresnet(w, cfg, M);
    ForwardTrace ct = forward_full(batch, child.weights, child.config);
    bool extract_ok = tensors_equal(ct.output, exit_m);

    WeightBundle lifted = lift(child, cfg);
    ForwardTrace lt = forward_full(batch, lifted, cfg);
    auto lifted_exit = [&](int64_t k) -> const Tensor& {
      return k < cfg.depth ? lt.exits[static_cast<size_t>(k)] : lt.output;
    };
    double tail_residual = 0.0;
    for (int64_t k = M; k < cfg.depth; ++k) {
      tail_residual = std::max(tail_residual, max_abs_diff_of(lifted_exit(k + 1), lifted_exit(k)));
    }
    if (extract_ok && tail_residual == 0.0) {
      ++exact;
    } else {
      c.require(false, fmt("case %" PRId64 ": extract bitwise=%d, lifted tail residual %.3e", i,
                           extract_ok ? 1 : 0, tail_residual));
    }
  }
  c.note(fmt("%" PRId64 "/%" PRId64
             " cases: extraction bitwise-equal and lifted tail residuals exactly 0",
             exact, cases));
}

// ---------------------------------------------------------------------------
// 3. The taped gradient of the full objective (weighted per-depth losses plus
//    decay) must match central finite differences coordinate by coordinate.
void crit_gradient(Ctx&, Crit& c) {
  Rng rng(3003);
  const int64_t nets = 20;
  int64_t coords = 0;
  double worst = 0.0;
  for (int64_t i = 0; i < nets; ++i) {
    NetworkConfig cfg = random_config(rng, 4, 8, i % 2 == 1,
                                      (i / 2) % 2 == 0 ? ExitMode::kWeightShared
                                                       : ExitMode::kExtraParams);
    cfg.loss_kind = (i / 4) % 2 == 0 ? LossKind::kCrossEntropy : LossKind::kL2;
    WeightBundle w0 = init_weights(cfg, 9000 + static_cast<uint64_t>(i));
    // Init closes the residual branches; move every coordinate off zero so no
    // gradient path is trivially inactive.
    jitter_weights(w0, rng, 0.3);
    Tensor x = random_batch(3, cfg.input_dim, rng);
    std::vector<int32_t> labels = random_labels(3, cfg.num_outputs, rng);
    double gamma = 0.05 + 0.9 * rng.uniform();
    double lambda = 0.001 + 0.009 * rng.uniform();

    Tape tape;
    TapedWeights tw = register_weights(tape, w0);
    Var J = taped_objective(tape, tw, cfg, x, labels, gamma, lambda);
    tape.backward(J);
    std::vector<Tensor> analytic;
    for (Var p : tw.params) analytic.push_back(tape.grad(p));

    auto views = param_views(w0);
    for (size_t p = 0; p < views.size(); ++p) {
      for (size_t k = 0; k < views[p].tensor->values.size(); ++k) {
        const double h = 1e-5;
        WeightBundle wp = w0;
        param_views(wp)[p].tensor->values[k] += h;
        double hi = objective(wp, cfg, x, labels, gamma, lambda).total;
        WeightBundle wm = w0;
        param_views(wm)[p].tensor->values[k] -= h;
        double lo = objective(wm, cfg, x, labels, gamma, lambda).total;
        double fd = (hi - lo) / (2.0 * h);
        double an = analytic[p].values[k];
        double denom = std::abs(fd) + std::abs(an);
        double rel = denom < 1e-8 ? std::abs(fd - an) : std::abs(fd - an) / denom;
        worst = std::max(worst, rel);
        ++coords;
        if (rel >= 1e-4) {
          c.require(false, fmt("net %" PRId64 " %s[%zu]: fd=%.9g analytic=%.9g rel=%.3e", i,
                               views[p].name.c_str(), k, fd, an, rel));
        }
      }
    }
  }
  c.note(fmt("%" PRId64 " coordinates across %" PRId64 " nets, worst relative error %.3e", coords,
             nets, worst));
}

// ---------------------------------------------------------------------------
// 4. Evaluating the full-depth objective at a lifted trained child must
//    reproduce the closed-form bound value to 1e-10 relative, and the lifted
//    per-depth loss average must reconstruct exactly from the child's
//    trajectory. Exercised at cut depths 0, 2, 4 of a depth-8 family.
void crit_feasible_point(Ctx&, Crit& c) {
  NetworkConfig cfg;
  cfg.depth = 8;
  cfg.widths.assign(9, 10);
  cfg.input_dim = 6;
  cfg.num_outputs = 3;
  Dataset ds = synth_blobs(3, 80, 6, 0.4, 401, "train");
  const double gamma = 0.3, lambda = 0.01;

  Rng rng(4004);
  Model parent;
  parent.config = cfg;
  parent.weights = init_weights(cfg, 402);
  jitter_weights(parent.weights, rng, 0.2);
  parent.meta.train.gamma = gamma;
  parent.meta.train.lambda = lambda;

  std::vector<Model> children;
  for (int64_t M : {int64_t{0}, int64_t{2}, int64_t{4}}) {
    SubNetwork shape = extract_subresnet(parent.weights, cfg, M);
    TrainConfig tc;
    tc.gamma = 0.0;
    tc.lambda = 1e-3;
    tc.epochs = 30;
    tc.batch_size = 32;
    tc.lr = 0.02;
    tc.seed = 410 + static_cast<uint64_t>(M);
    TrainResult r = train(shape.config, tc, ds, ds, tc.epochs);
    Model child;
    child.config = shape.config;
    child.weights = r.weights;
    children.push_back(std::move(child));
  }

  // The audit itself enforces the identity at 1e-10 and would throw here.
  BoundTable table = audit_bounds(parent, children, ds, gamma, lambda);
  for (const BoundReport& row : table.rows) {
    c.require(row.lift_identity_err <= 1e-10,
              fmt("cut %" PRId64 ": lifted objective off by %.3e relative", row.M,
                  row.lift_identity_err));
  }

  // Same identities recomputed here, independently of the audit internals.
  for (size_t i = 0; i < children.size(); ++i) {
    const Model& child = children[i];
    int64_t M = child.config.depth;
    TrajectoryRecord crec = evaluate_trajectory(child.weights, child.config, ds);
    double l_bar = crec.losses.back();
    std::vector<double> stage_losses(crec.losses.begin(), crec.losses.begin() + M);

    WeightBundle lifted = lift({child.config, child.weights}, cfg);
    TrajectoryRecord lrec = evaluate_trajectory(lifted, cfg, ds);
    double at_point = objective_from_trajectory(lrec, gamma, lambda);
    double closed = objective_upper_bound(stage_losses, crec.param_norms_sq, l_bar, gamma, lambda,
                                          cfg.depth);
    double rel = std::abs(at_point - closed) / std::max(1.0, std::abs(closed));
    c.require(rel <= 1e-10, fmt("cut %" PRId64 ": objective identity off by %.3e", M, rel));

    double avg = 0.0;
    for (double l : lrec.losses) avg += l;
    avg /= static_cast<double>(cfg.depth + 1);
    double avg_closed = 0.0;
    for (int64_t k = 0; k < M; ++k) avg_closed += crec.losses[static_cast<size_t>(k)];
    avg_closed += static_cast<double>(cfg.depth - M + 1) * l_bar;
    avg_closed /= static_cast<double>(cfg.depth + 1);
    double avg_rel = std::abs(avg - avg_closed) / std::max(1.0, std::abs(avg_closed));
    c.require(avg_rel <= 1e-10,
              fmt("cut %" PRId64 ": average-loss identity off by %.3e", M, avg_rel));
    c.note(fmt("cut %" PRId64 ": objective identity %.2e, average identity %.2e", M, rel,
               avg_rel));
  }
}

// ---------------------------------------------------------------------------
// 5. The closed-form bound arithmetic at fixed reference inputs: a depth-54
//    run whose child terminal loss is 1.326 (stage weight 0.02, cut 0) must
//    give objective bound 2.758 and average bound 2.507 at display precision;
//    terminal loss 1.188 must give 2.470 and 2.246.
void crit_reference_arithmetic(Ctx&, Crit& c) {
  struct Case {
    double l_bar;
    long want_j_milli;
    long want_avg_milli;
  };
  const Case cases[] = {{1.326, 2758, 2507}, {1.188, 2470, 2246}};
  for (const Case& k : cases) {
    double j = objective_upper_bound({}, {}, k.l_bar, 0.02, 0.0, 54);
    double avg = average_loss_bound({}, k.l_bar, 0.02, 0, 54).bound;
    long j_milli = std::lround(j * 1000.0);
    long avg_milli = std::lround(avg * 1000.0);
    // Values are printed to three decimals, so matching means agreeing within
    // one unit in the last displayed digit.
    c.require(std::labs(j_milli - k.want_j_milli) <= 1,
              fmt("terminal loss %.3f: objective bound %.5f, wanted %.3f +-0.001", k.l_bar, j,
                  static_cast<double>(k.want_j_milli) / 1000.0));
    c.require(std::labs(avg_milli - k.want_avg_milli) <= 1,
              fmt("terminal loss %.3f: average bound %.5f, wanted %.3f +-0.001", k.l_bar, avg,
                  static_cast<double>(k.want_avg_milli) / 1000.0));
    c.note(fmt("terminal loss %.3f: objective bound %.5f, average bound %.5f", k.l_bar, j, avg));
  }
}

// ---------------------------------------------------------------------------
// 6. With the stage weight at zero the full training loop must coincide,
//    bitwise and epoch by epoch, with a hand-written terminal-loss loop.
void crit_gamma_zero(Ctx&, Crit& c) {
  NetworkConfig cfg;
  cfg.depth = 2;
  cfg.widths = {4, 4, 4};
  cfg.input_dim = 3;
  cfg.num_outputs = 2;
  Dataset tr = synth_blobs(2, 24, 3, 0.5, 601, "train");

  TrainConfig base;
  base.gamma = 0.0;
  base.lambda = 1e-4;
  base.batch_size = 16;
  base.lr = 0.05;
  base.momentum = 0.9;
  base.seed = 602;

  // Reference loop, written op by op with only the terminal loss and decay.
  WeightBundle w = init_weights(cfg, base.seed);
  SgdState state;
  for (int64_t epoch = 0; epoch < 3; ++epoch) {
    double lr = lr_at(epoch, base);
    for (const auto& slice : batches(tr.size(), base.batch_size, base.seed, epoch)) {
      Tensor x = gather_rows(tr.features, slice);
      std::vector<int32_t> labels = gather_labels(tr.labels, slice);
      Tape tape;
      TapedWeights tw = register_weights(tape, w);
      Var h = tape.relu(tape.add_bias(tape.matmul(tape.constant(x), tw.embed.W), tw.embed.b));
      for (const TapedBlock& blk : tw.blocks) {
        Var f1 = tape.relu(tape.add_bias(tape.matmul(h, blk.fc1.W), blk.fc1.b));
        Var f = tape.add_bias(tape.matmul(f1, blk.fc2.W), blk.fc2.b);
        h = tape.add(h, f);
      }
      Var logits = tape.add_bias(tape.matmul(h, tw.head.W), tw.head.b);
      Var loss = tape.softmax_cross_entropy(logits, labels);
      for (const TapedBlock& blk : tw.blocks) {
        Var ssq = tape.sum_squares(blk.fc1.W);
        ssq = tape.add(ssq, tape.sum_squares(blk.fc1.b));
        ssq = tape.add(ssq, tape.sum_squares(blk.fc2.W));
        ssq = tape.add(ssq, tape.sum_squares(blk.fc2.b));
        loss = tape.add(loss, tape.scale(ssq, 0.5 * base.lambda));
      }
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (Var p : tw.params) grads.push_back(tape.grad(p));
      sgd_step(w, grads, state, base.momentum, lr, lr);
    }
    // Epoch boundary: the library run stopped exactly here must agree.
    TrainConfig tc = base;
    tc.epochs = epoch + 1;
    TrainResult res = train(cfg, tc, tr, tr, tc.epochs);
    bool same = bundles_equal(res.weights, w);
    c.require(same, fmt("epoch %" PRId64 ": weights differ from the reference loop", epoch + 1));
    if (same) c.note(fmt("epoch %" PRId64 ": bitwise identical", epoch + 1));
  }
}

// ---------------------------------------------------------------------------
// 7. Desk-scale behavior on a depth-16, width-32 net. MNIST files are not
//    bundled, so the run substitutes a synthetic task with the property that
//    matters at this scale: depth is needed, but not all of it. Requirements:
//    (a) high test accuracy, (b) the loss trajectory plateaus before full
//    depth, (c) pruning at the plateau costs at most 1.5 accuracy points,
//    (d) late-block parameter norms end strictly smaller than in a plain
//    terminal-loss run with the same seed.
void crit_desk_scale(Ctx& ctx, Crit& c) {
  ctx.shells_train = make_shells(3, 1000, 5, 1.0, 0.7, 0.05, 20282, "train");
  ctx.shells_test = make_shells(3, 1000, 5, 1.0, 0.7, 0.05, 30282, "test");
  const Dataset& tr = ctx.shells_train;
  const Dataset& te = ctx.shells_test;
  c.note("mnist data not bundled; using 3 concentric shells in 5 dimensions, 3000/3000 samples");

  NetworkConfig cfg;
  cfg.depth = 16;
  cfg.widths.assign(17, 32);
  cfg.input_dim = 5;
  cfg.num_outputs = 3;
  cfg.loss_kind = LossKind::kL2;

  TrainConfig tc;
  tc.gamma = 0.02;
  tc.lambda = 0.005;
  tc.epochs = 400;
  tc.batch_size = 128;
  tc.lr = 0.015;
  tc.momentum = 0.9;
  tc.seed = 42;

  TrainResult stage = train(cfg, tc, tr, te, tc.epochs);
  TrajectoryRecord rec = evaluate_trajectory(stage.weights, cfg, te);

  TrainConfig tc0 = tc;
  tc0.gamma = 0.0;
  TrainResult plain = train(cfg, tc0, tr, te, tc0.epochs);
  TrajectoryRecord rec0 = evaluate_trajectory(plain.weights, cfg, te);

  double acc = rec.accuracies.back();
  double acc0 = rec0.accuracies.back();
  c.note(fmt("test accuracy %.4f (terminal-loss twin %.4f)", acc, acc0));
  c.require(acc >= 0.95, fmt("test accuracy %.4f below 0.95", acc));

  const double tol = 0.05;
  int64_t M = plateau_depth(rec, tol);
  c.note(fmt("plateau depth %" PRId64 " of %" PRId64 " at tolerance %.2f (twin: %" PRId64 ")", M,
             cfg.depth, tol, plateau_depth(rec0, tol)));
  c.require(M < cfg.depth, fmt("no plateau before full depth (%" PRId64 ")", M));

  ctx.stage_parent.config = cfg;
  ctx.stage_parent.weights = stage.weights;
  ctx.stage_parent.meta.dataset_uri = "";
  ctx.stage_parent.meta.normalization = tr.normalization;
  ctx.stage_parent.meta.training_mode = training_mode_for(tc.gamma);
  ctx.stage_parent.meta.epoch = tc.epochs - 1;
  ctx.stage_parent.meta.train = tc;
  ctx.have_parent = true;

  Model child = prune(ctx.stage_parent, M);
  TrajectoryRecord crec = evaluate_trajectory(child.weights, child.config, te);
  double child_acc = crec.accuracies.back();
  c.note(fmt("pruned to depth %" PRId64 ": test accuracy %.4f (drop %.4f)", M, child_acc,
             acc - child_acc));
  c.require(std::abs(acc - child_acc) <= 0.015,
            fmt("pruned accuracy %.4f strays more than 1.5 points from %.4f", child_acc, acc));

  auto last_quartile = [](const TrajectoryRecord& r) {
    int64_t q = r.depth / 4;
    double s = 0.0;
    for (int64_t k = r.depth - q; k < r.depth; ++k) s += r.param_norms_sq[static_cast<size_t>(k)];
    return s / static_cast<double>(q);
  };
  double tail = last_quartile(rec);
  double tail0 = last_quartile(rec0);
  c.note(fmt("last-quartile mean |w_F|^2: %.4f stage-cost vs %.4f terminal-only", tail, tail0));
  c.require(tail < tail0, fmt("late-block norms %.4f not below the twin's %.4f", tail, tail0));
}

// ---------------------------------------------------------------------------
// 8. The bound audit over the desk-scale net and independently trained
//    shallow children must produce a complete table: one row per child with
//    finite bound values and the per-row inequality flags. The flags are
//    reported, not asserted; SGD does not certify a global optimum.
void crit_bound_audit(Ctx& ctx, Crit& c) {
  c.require(ctx.have_parent, "desk-scale net unavailable (previous criterion failed)");
  if (!ctx.have_parent) return;

  std::vector<Model> children;
  std::vector<int64_t> cuts = {0, 4, 8, 12};
  for (int64_t M : cuts) {
    NetworkConfig ccfg;
    ccfg.depth = M;
    ccfg.widths.assign(static_cast<size_t>(M) + 1, 32);
    ccfg.input_dim = 5;
    ccfg.num_outputs = 3;
    ccfg.loss_kind = LossKind::kL2;
    TrainConfig tc;
    tc.gamma = 0.0;
    tc.lambda = 0.005;
    tc.epochs = 200;
    tc.batch_size = 128;
    tc.lr = 0.015;
    tc.momentum = 0.9;
    tc.seed = 1000 + static_cast<uint64_t>(M);
    TrainResult r = train(ccfg, tc, ctx.shells_train, ctx.shells_test, tc.epochs);
    Model child;
    child.config = ccfg;
    child.weights = r.weights;
    child.meta.normalization = ctx.shells_train.normalization;
    child.meta.training_mode = training_mode_for(tc.gamma);
    child.meta.epoch = tc.epochs - 1;
    child.meta.train = tc;
    children.push_back(std::move(child));
  }

  BoundsReport rep = cmd_bounds(ctx.stage_parent, children, ctx.shells_train, "");
  const BoundTable& t = rep.table;
  c.require(t.rows.size() == cuts.size(),
            fmt("expected %zu rows, got %zu", cuts.size(), t.rows.size()));
  for (size_t i = 0; i < t.rows.size() && i < cuts.size(); ++i) {
    const BoundReport& r = t.rows[i];
    c.require(r.M == cuts[i], fmt("row %zu: cut %" PRId64 ", expected %" PRId64, i, r.M, cuts[i]));
    bool finite = std::isfinite(r.l_bar) && std::isfinite(r.j_child) && std::isfinite(r.j_bound) &&
                  std::isfinite(r.j_parent) && std::isfinite(r.l_avg_bound) &&
                  std::isfinite(r.avg_constant);
    c.require(finite, fmt("row %zu has non-finite entries", i));
    c.require(r.lift_identity_err <= 1e-10,
              fmt("row %zu: lifted objective off by %.3e", i, r.lift_identity_err));
    c.note(fmt("cut %2" PRId64 ": L_bar %.4f  J_bound %.4f  J_parent %.4f  %s  %s", r.M, r.l_bar,
               r.j_bound, r.j_parent,
               r.objective_bound_holds ? "objective bound holds" : "objective bound violated",
               r.average_bound_holds ? "average bound holds" : "average bound violated"));
  }
  c.require(!rep.text.empty(), "empty report text");
}

// ---------------------------------------------------------------------------
// 9. Serialization round trips: checkpoint save/load/save byte identity,
//    byte-backed dataset out and back through the on-disk image format, and
//    trajectory CSV readback, all bit-exact.
void crit_round_trips(Ctx&, Crit& c) {
  fs::path dir = fs::temp_directory_path() / "stagecost_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(9009);

  // Checkpoints: a staged net, a per-depth-exit net, and a pruned child whose
  // head keeps the parent's projection chain.
  std::vector<Model> fixtures;
  {
    NetworkConfig a;
    a.depth = 3;
    a.widths = {5, 7, 7, 9};
    a.input_dim = 4;
    a.num_outputs = 3;
    Model m;
    m.config = a;
    m.weights = init_weights(a, 901);
    jitter_weights(m.weights, rng, 0.3);
    m.meta.dataset_uri = "blobs://3/40/4/0.3/9";
    m.meta.training_mode = "stage_cost";
    m.meta.epoch = 4;
    m.meta.train.gamma = 0.05;
    m.meta.train.lambda = 1e-4;
    m.meta.train.epochs = 5;
    m.meta.train.seed = 7;
    fixtures.push_back(m);
    fixtures.push_back(prune(m, 1));

    NetworkConfig b;
    b.depth = 2;
    b.widths = {6, 6, 6};
    b.input_dim = 3;
    b.num_outputs = 2;
    b.exit_mode = ExitMode::kExtraParams;
    b.loss_kind = LossKind::kL2;
    Model e;
    e.config = b;
    e.weights = init_weights(b, 902);
    fixtures.push_back(e);
  }
  int fixture_id = 0;
  for (const Model& m : fixtures) {
    std::string p1 = (dir / fmt("ckpt%d_a.sckp", fixture_id)).string();
    std::string p2 = (dir / fmt("ckpt%d_b.sckp", fixture_id)).string();
    save_model(m, p1);
    Model loaded = load_model(p1);
    save_model(loaded, p2);
    bool bytes_same = read_bytes(p1) == read_bytes(p2);
    bool weights_same = bundles_equal(m.weights, loaded.weights);
    c.require(bytes_same && weights_same,
              fmt("checkpoint fixture %d: bytes_same=%d weights_same=%d", fixture_id,
                  bytes_same ? 1 : 0, weights_same ? 1 : 0));
    ++fixture_id;
  }
  c.note(fmt("%d checkpoint fixtures: save/load/save byte-identical", fixture_id));

  // Byte-backed features through the image format, flat and 28x28 layouts.
  int idx_fixtures = 0;
  for (int64_t d : {int64_t{12}, int64_t{784}}) {
    int64_t n = d == 784 ? 40 : 60;
    Dataset ds;
    ds.features = Tensor::zeros({n, d});
    for (double& v : ds.features.values) {
      v = (static_cast<double>(rng.below(256)) / 255.0 - 0.1307) / 0.3081;
    }
    ds.labels = random_labels(n, 10, rng);
    ds.num_classes = 10;
    ds.split = "train";
    ds.normalization = "mnist";
    std::string imgs = (dir / fmt("img%d-idx3-ubyte", idx_fixtures)).string();
    std::string labs = (dir / fmt("lab%d-idx1-ubyte", idx_fixtures)).string();
    write_idx(ds, imgs, labs);
    Dataset back = load_idx(imgs, labs, "train");
    bool feats = tensors_equal(back.features, ds.features);
    bool labels_same = back.labels == ds.labels;
    std::string imgs2 = imgs + ".2";
    std::string labs2 = labs + ".2";
    write_idx(back, imgs2, labs2);
    bool bytes_same =
        read_bytes(imgs) == read_bytes(imgs2) && read_bytes(labs) == read_bytes(labs2);
    c.require(feats && labels_same && bytes_same,
              fmt("idx fixture dim %" PRId64 ": features=%d labels=%d bytes=%d", d, feats ? 1 : 0,
                  labels_same ? 1 : 0, bytes_same ? 1 : 0));
    ++idx_fixtures;
  }
  c.note(fmt("%d idx fixtures: write/read identity, rewrite byte-identical", idx_fixtures));

  // Trajectory CSV: %.17g columns must read back bit for bit.
  {
    NetworkConfig cfg;
    cfg.depth = 3;
    cfg.widths = {6, 6, 6, 6};
    cfg.input_dim = 4;
    cfg.num_outputs = 3;
    WeightBundle w = init_weights(cfg, 903);
    jitter_weights(w, rng, 0.3);
    Dataset ds = synth_blobs(3, 30, 4, 0.4, 904, "test");
    TrajectoryRecord rec = evaluate_trajectory(w, cfg, ds);
    int csv_ok = 0;
    for (bool with_epoch : {true, false}) {
      rec.epoch = with_epoch ? 2 : -1;
      std::string path = (dir / (with_epoch ? "traj_e.csv" : "traj.csv")).string();
      append_trajectory_csv(path, rec, with_epoch);
      std::vector<TrajectoryRecord> back = read_trajectory_csv(path);
      bool same = back.size() == 1 && back[0].depth == rec.depth && back[0].split == rec.split &&
                  back[0].epoch == rec.epoch && back[0].losses == rec.losses &&
                  back[0].accuracies == rec.accuracies &&
                  back[0].param_norms_sq == rec.param_norms_sq &&
                  back[0].residual_norms == rec.residual_norms;
      c.require(same, fmt("trajectory csv (epoch column %d) did not read back bit-exact",
                          with_epoch ? 1 : 0));
      csv_ok += same ? 1 : 0;
    }
    c.note(fmt("%d trajectory csv fixtures read back bit-exact", csv_ok));
  }

  fs::remove_all(dir);
}

}  // namespace

int main() {
  struct Entry {
    const char* label;
    void (*fn)(Ctx&, Crit&);
    double budget_s;  // 0 means no hard budget
  };
  const Entry entries[] = {
      {"identity mapping is exact under zeroed residual tails", crit_identity, 5.0},
      {"subnetwork extraction and lifting are exact", crit_subnetwork, 5.0},
      {"objective gradient matches finite differences", crit_gradient, 30.0},
      {"lifted feasible points reproduce the closed-form bounds", crit_feasible_point, 0.0},
      {"bound arithmetic at reference inputs", crit_reference_arithmetic, 0.0},
      {"stage weight zero reduces to plain terminal-loss training", crit_gamma_zero, 0.0},
      {"desk-scale run is accurate, prunable, and thin-tailed", crit_desk_scale, 600.0},
      {"bound audit over standard-trained children is complete", crit_bound_audit, 0.0},
      {"checkpoint, image-format, and csv round trips are bit-exact", crit_round_trips, 0.0},
  };

  Ctx ctx;
  int failed = 0;
  int id = 0;
  for (const Entry& e : entries) {
    ++id;
    Crit c;
    auto t0 = std::chrono::steady_clock::now();
    try {
      e.fn(ctx, c);
    } catch (const std::exception& ex) {
      c.require(false, fmt("unexpected error: %s", ex.what()));
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (e.budget_s > 0.0) {
      c.require(secs < e.budget_s, fmt("took %.1fs, budget %.0fs", secs, e.budget_s));
    }
    std::printf("%s criterion %d: %s\n", c.ok ? "PASS" : "FAIL", id, e.label);
    for (const std::string& line : c.info) std::printf("    %s\n", line.c_str());
    if (!c.ok) {
      std::printf("    failure: %s\n", c.why.c_str());
      ++failed;
    }
    std::printf("    (%.1fs)\n", secs);
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", id - failed, id);
  return failed == 0 ? 0 : 1;
}
