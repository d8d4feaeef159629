#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stagecost/bounds.hpp"
#include "stagecost/checkpoint.hpp"
#include "stagecost/data.hpp"
#include "stagecost/run_config.hpp"
#include "stagecost/training.hpp"

namespace stagecost {

// High-level operations behind the CLI: each one does the whole job (opens
// data, trains or evaluates, writes artifacts) and returns a printable
// report. Errors surface as the usual exception types.

struct TrainArtifacts {
  std::string final_path;
  std::string best_path;
  std::string train_csv;
  std::string test_csv;
  int64_t best_epoch = -1;
  double best_accuracy = 0.0;        // held-out final-depth accuracy at best_epoch
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  std::string summary;
};

/// Runs the configured training job and writes final/best checkpoints plus
/// one trajectory CSV per split under rc.out_dir (which must be set).
TrainArtifacts cmd_train(const RunConfig& rc);

struct EvalReport {
  TrajectoryRecord record;
  std::string csv;      // evaluation layout, no epoch column
  std::string summary;  // one line; a second line flags normalization mismatch
};

/// Per-depth metrics of a model on a dataset; writes csv to out_csv unless
/// the path is empty.
EvalReport cmd_eval(const Model& m, const Dataset& ds, const std::string& out_csv);

struct PruneReport {
  Model child;
  int64_t chosen_depth = -1;
  std::string child_path;  // empty when nothing was written
  std::string report;
};

/// Cuts the model at `depth`, or at the plateau depth of its trajectory on
/// `ds` when auto_select is set. ds may be null only in fixed-depth mode
/// (the report then skips accuracies). A non-empty out_dir receives the
/// child as pruned_depth<M>.sckp.
PruneReport cmd_prune(const Model& parent, int64_t depth, bool auto_select, double tolerance,
                      const Dataset* ds, const std::string& out_dir);

struct BoundsReport {
  BoundTable table;
  std::string text;
  std::string csv;
};

/// Audits the loss bounds of the children against the parent on ds, using
/// the stage weight and decay the parent was trained with. Writes the CSV
/// form to out_csv unless empty.
BoundsReport cmd_bounds(const Model& parent, const std::vector<Model>& children,
                        const Dataset& ds, const std::string& out_csv);

}  // namespace stagecost
