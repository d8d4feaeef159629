#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stagecost/checkpoint.hpp"
#include "stagecost/data.hpp"
#include "stagecost/training.hpp"

namespace stagecost {

/// The stage-cost objective assembled from a recorded trajectory exactly as
/// the trainer assembles it: weighted per-depth losses in depth order, then
/// the terminal loss, then the decay terms in block order.
double objective_from_trajectory(const TrajectoryRecord& rec, double gamma, double lambda);

/// Closed-form objective value of a depth-N net lifted from a depth-M one:
/// the M trained stages pay their recorded costs, every deeper stage pays
/// gamma * l_bar, and the terminal loss stays l_bar. Because lifting changes
/// nothing the deep net can reach, this is an upper bound on its optimum.
double objective_upper_bound(const std::vector<double>& child_losses,
                             const std::vector<double>& child_decay_sq, double l_bar,
                             double gamma, double lambda, int64_t full_depth);

struct AverageLossBound {
  double constant;  // C in  average loss <= l_bar + C / (N + 1)
  double bound;     // l_bar + C / (N + 1)
};

/// Bound on the deep net's average per-depth loss; valid for stage weights in
/// (0, 1] and derived for decay-free training.
AverageLossBound average_loss_bound(const std::vector<double>& child_losses, double l_bar,
                                    double gamma, int64_t child_depth,
                                    int64_t full_depth);

struct BoundReport {
  int64_t M = 0;            // child depth
  double l_bar = 0.0;       // child terminal loss
  double j_child = 0.0;     // child's own stage-cost objective
  double j_bound = 0.0;     // closed-form bound for the full depth
  double j_parent = 0.0;    // parent's achieved objective on the same split
  double gap_child = 0.0;   // j_bound - j_child
  double gap_parent = 0.0;  // j_bound - j_parent
  double l_avg_parent = 0.0;  // mean of the parent's per-depth losses
  double avg_constant = 0.0;  // C of the average-loss bound
  double l_avg_bound = 0.0;
  double avg_gap = 0.0;  // l_avg_bound - l_avg_parent
  // The inequalities assume the parent reached its optimum, which SGD does
  // not guarantee, so they are reported rather than enforced.
  bool objective_bound_holds = false;
  bool average_bound_holds = false;
  // Relative error of the machine check: the parent objective evaluated at
  // the lifted child must reproduce j_bound.
  double lift_identity_err = 0.0;
};

struct BoundTable {
  std::vector<BoundReport> rows;  // ascending M
  int64_t parent_depth = 0;
  double gamma = 0.0;
  double lambda = 0.0;
  std::string split;
  std::string note;  // conventions that deviate from the clean derivation
};

/// Evaluate parent and children on one split, compute both bounds per child,
/// and verify the lifted feasible point reproduces the closed-form objective
/// bound to 1e-10 (throws NumericError if it does not). Children must be
/// subnetworks of the parent's architecture.
BoundTable audit_bounds(const Model& parent, const std::vector<Model>& children,
                        const Dataset& ds, double gamma, double lambda);

std::string bounds_to_csv(const BoundTable& t);
std::string bounds_to_text(const BoundTable& t);

}  // namespace stagecost
