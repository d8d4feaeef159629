#include "stagecost/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <utility>

#include "stagecost/errors.hpp"
#include "stagecost/fsio.hpp"
#include "stagecost/subresnet.hpp"
#include "stagecost/trajectory_io.hpp"

namespace stagecost {

namespace {

std::string fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string param_line(const char* who, int64_t depth, int64_t params) {
  std::ostringstream s;
  s << who << " depth " << depth << ": " << params << " parameters ("
    << fixed(static_cast<double>(params) / 1e6, 2) << " M)";
  return s.str();
}

}  // namespace

TrainArtifacts cmd_train(const RunConfig& rc) {
  rc.validate();
  if (rc.out_dir.empty()) {
    throw ValidationError("train needs an output directory (out_dir in the config or --out-dir)");
  }
  Dataset train_ds = open_dataset(rc.dataset_uri, "train");
  Dataset test_ds = open_dataset(rc.dataset_uri, "test");

  TrainArtifacts art;
  art.final_path = join(rc.out_dir, "final.sckp");
  art.best_path = join(rc.out_dir, "best.sckp");
  art.train_csv = join(rc.out_dir, "train_trajectory.csv");
  art.test_csv = join(rc.out_dir, "test_trajectory.csv");

  // Truncate leftovers from earlier runs so each CSV covers exactly one run.
  write_file_atomic(art.train_csv, trajectory_csv_header(true) + "\n", "trajectory csv");
  write_file_atomic(art.test_csv, trajectory_csv_header(true) + "\n", "trajectory csv");

  auto on_eval = [&](const TrajectoryRecord& train_rec, const TrajectoryRecord& eval_rec) {
    append_trajectory_csv(art.train_csv, train_rec, true);
    append_trajectory_csv(art.test_csv, eval_rec, true);
  };
  TrainResult res = train(rc.network, rc.train, train_ds, test_ds, rc.eval_every, on_eval);

  art.best_epoch = res.best_epoch;
  art.final_train_accuracy = res.train_records.back().accuracies.back();
  art.final_test_accuracy = res.eval_records.back().accuracies.back();
  for (const TrajectoryRecord& rec : res.eval_records) {
    if (rec.epoch == res.best_epoch) art.best_accuracy = rec.accuracies.back();
  }

  Model final_m;
  final_m.config = rc.network;
  final_m.weights = std::move(res.weights);
  final_m.meta.dataset_uri = rc.dataset_uri;
  final_m.meta.normalization = train_ds.normalization;
  final_m.meta.training_mode = training_mode_for(rc.train.gamma);
  final_m.meta.epoch = rc.train.epochs - 1;
  final_m.meta.train = rc.train;
  save_model(final_m, art.final_path);

  Model best_m;
  best_m.config = final_m.config;
  best_m.weights = std::move(res.best_weights);
  best_m.meta = final_m.meta;
  best_m.meta.epoch = res.best_epoch;
  save_model(best_m, art.best_path);

  std::ostringstream s;
  s << "trained depth " << rc.network.depth << " for " << rc.train.epochs << " epochs ("
    << "training_mode " << final_m.meta.training_mode << ", gamma " << rc.train.gamma
    << ", lambda " << rc.train.lambda << ", seed " << rc.train.seed << ")\n";
  s << "dataset " << rc.dataset_uri << ": train n=" << train_ds.size()
    << ", test n=" << test_ds.size() << "\n";
  s << "final train accuracy " << fixed(art.final_train_accuracy, 4) << ", test accuracy "
    << fixed(art.final_test_accuracy, 4) << "\n";
  s << "best epoch " << art.best_epoch << ", test accuracy " << fixed(art.best_accuracy, 4)
    << "\n";
  s << "wrote " << art.final_path << "\n";
  s << "wrote " << art.best_path << "\n";
  s << "wrote " << art.train_csv << "\n";
  s << "wrote " << art.test_csv << "\n";
  art.summary = s.str();
  return art;
}

EvalReport cmd_eval(const Model& m, const Dataset& ds, const std::string& out_csv) {
  EvalReport r;
  r.record = evaluate_trajectory(m.weights, m.config, ds);
  r.csv = trajectory_csv_header(false) + "\n" + trajectory_csv_rows(r.record, false);
  std::ostringstream s;
  s << "depth " << m.config.depth << " " << ds.split << ": loss "
    << fixed(r.record.losses.back(), 6) << ", accuracy " << fixed(r.record.accuracies.back(), 4)
    << " (" << ds.size() << " samples)";
  if (ds.normalization != m.meta.normalization) {
    s << "\nnote: dataset normalization \"" << ds.normalization
      << "\" differs from checkpoint normalization \"" << m.meta.normalization << "\"";
  }
  if (!out_csv.empty()) {
    write_file_atomic(out_csv, r.csv, "trajectory csv");
    s << "\nwrote " << out_csv;
  }
  r.summary = s.str();
  return r;
}

PruneReport cmd_prune(const Model& parent, int64_t depth, bool auto_select, double tolerance,
                      const Dataset* ds, const std::string& out_dir) {
  TrajectoryRecord parent_rec;
  bool have_rec = false;
  int64_t m = depth;
  if (auto_select) {
    if (ds == nullptr) {
      throw ValidationError("auto pruning needs a dataset to measure the trajectory");
    }
    parent_rec = evaluate_trajectory(parent.weights, parent.config, *ds);
    have_rec = true;
    m = plateau_depth(parent_rec, tolerance);
  }

  PruneReport r;
  r.child = prune(parent, m);
  r.chosen_depth = m;

  std::ostringstream s;
  s << param_line("parent", parent.config.depth, param_count(parent.weights)) << "\n";
  s << param_line("child", m, param_count(r.child.weights)) << "\n";
  if (auto_select) s << "auto-selected depth " << m << " at tolerance " << tolerance << "\n";
  if (ds != nullptr) {
    if (!have_rec) parent_rec = evaluate_trajectory(parent.weights, parent.config, *ds);
    TrajectoryRecord child_rec = evaluate_trajectory(r.child.weights, r.child.config, *ds);
    s << "parent " << ds->split << " accuracy " << fixed(parent_rec.accuracies.back(), 4)
      << "\n";
    s << "child " << ds->split << " accuracy " << fixed(child_rec.accuracies.back(), 4) << "\n";
  }
  if (!parent.config.homogeneous()) {
    s << "note: parent widths change between stages; pruned accuracy across a stage boundary "
         "is unreliable\n";
  }
  if (!out_dir.empty()) {
    r.child_path = join(out_dir, ("pruned_depth" + std::to_string(m) + ".sckp").c_str());
    save_model(r.child, r.child_path);
    s << "wrote " << r.child_path << "\n";
  }
  r.report = s.str();
  return r;
}

BoundsReport cmd_bounds(const Model& parent, const std::vector<Model>& children,
                        const Dataset& ds, const std::string& out_csv) {
  BoundsReport r;
  r.table =
      audit_bounds(parent, children, ds, parent.meta.train.gamma, parent.meta.train.lambda);
  r.text = bounds_to_text(r.table);
  r.csv = bounds_to_csv(r.table);
  if (!out_csv.empty()) write_file_atomic(out_csv, r.csv, "bound table csv");
  return r;
}

}  // namespace stagecost
