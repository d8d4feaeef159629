#include "stagecost/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "stagecost/errors.hpp"
#include "stagecost/subresnet.hpp"

namespace stagecost {

double objective_from_trajectory(const TrajectoryRecord& rec, double gamma,
                                 double lambda) {
  if (rec.losses.empty() || rec.param_norms_sq.size() + 1 != rec.losses.size()) {
    throw ValidationError("trajectory lacks per-depth losses or parameter norms");
  }
  const double half = 0.5 * lambda;
  double total = 0.0;
  for (size_t k = 0; k + 1 < rec.losses.size(); ++k) total += gamma * rec.losses[k];
  total += rec.losses.back();
  for (double d : rec.param_norms_sq) total += half * d;
  return total;
}

double objective_upper_bound(const std::vector<double>& child_losses,
                             const std::vector<double>& child_decay_sq, double l_bar,
                             double gamma, double lambda, int64_t full_depth) {
  if (!std::isfinite(gamma) || gamma <= 0.0) {
    throw ValidationError("objective bound needs a positive stage weight");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw ValidationError("decay must be finite and non-negative");
  }
  if (!std::isfinite(l_bar)) throw ValidationError("terminal loss must be finite");
  if (child_losses.size() != child_decay_sq.size()) {
    throw ValidationError("per-depth losses and decay terms must align");
  }
  const int64_t M = static_cast<int64_t>(child_losses.size());
  if (M > full_depth) throw ValidationError("child depth exceeds the full depth");

  const double half = 0.5 * lambda;
  double total = 0.0;
  for (int64_t k = 0; k < M; ++k) {
    total += gamma * child_losses[static_cast<size_t>(k)] +
             half * child_decay_sq[static_cast<size_t>(k)];
  }
  total += (1.0 + gamma * static_cast<double>(full_depth - M)) * l_bar;
  return total;
}

AverageLossBound average_loss_bound(const std::vector<double>& child_losses, double l_bar,
                                    double gamma, int64_t child_depth,
                                    int64_t full_depth) {
  if (!std::isfinite(gamma) || gamma <= 0.0 || gamma > 1.0) {
    throw ValidationError("average-loss bound needs a stage weight in (0, 1]");
  }
  if (!std::isfinite(l_bar)) throw ValidationError("terminal loss must be finite");
  if (child_depth != static_cast<int64_t>(child_losses.size())) {
    throw ValidationError("child depth must match the loss count");
  }
  if (child_depth > full_depth) throw ValidationError("child depth exceeds the full depth");

  double c = 0.0;
  for (double l : child_losses) c += l;
  c += ((1.0 - gamma - gamma * static_cast<double>(child_depth)) / gamma) * l_bar;
  double bound = l_bar + c / static_cast<double>(full_depth + 1);
  return {c, bound};
}

BoundTable audit_bounds(const Model& parent, const std::vector<Model>& children,
                        const Dataset& ds, double gamma, double lambda) {
  if (!std::isfinite(gamma) || gamma <= 0.0 || gamma > 1.0) {
    throw ValidationError("bound audit needs a stage weight in (0, 1]");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw ValidationError("decay must be finite and non-negative");
  }
  const int64_t N = parent.config.depth;

  TrajectoryRecord prec = evaluate_trajectory(parent.weights, parent.config, ds);
  double j_parent = objective_from_trajectory(prec, gamma, lambda);
  double l_sum = 0.0;
  for (double l : prec.losses) l_sum += l;
  double l_avg_parent = l_sum / static_cast<double>(N + 1);

  BoundTable table;
  table.parent_depth = N;
  table.gamma = gamma;
  table.lambda = lambda;
  table.split = ds.split;
  if (lambda > 0.0) {
    std::ostringstream note;
    note << "average-loss bound computed from runs with weight decay (lambda=" << lambda
         << "); its closed form assumes decay-free stages";
    table.note = note.str();
  }

  for (const Model& c : children) {
    SubNetwork sub{c.config, c.weights};
    WeightBundle lifted = lift(sub, parent.config);  // validates compatibility

    TrajectoryRecord crec = evaluate_trajectory(c.weights, c.config, ds);
    const int64_t M = c.config.depth;
    double l_bar = crec.losses.back();
    std::vector<double> exit_losses(crec.losses.begin(), crec.losses.end() - 1);

    BoundReport r;
    r.M = M;
    r.l_bar = l_bar;
    r.j_child = objective_from_trajectory(crec, gamma, lambda);
    r.j_bound =
        objective_upper_bound(exit_losses, crec.param_norms_sq, l_bar, gamma, lambda, N);
    r.j_parent = j_parent;
    r.gap_child = r.j_bound - r.j_child;
    r.gap_parent = r.j_bound - r.j_parent;
    r.l_avg_parent = l_avg_parent;
    AverageLossBound ab = average_loss_bound(exit_losses, l_bar, gamma, M, N);
    r.avg_constant = ab.constant;
    r.l_avg_bound = ab.bound;
    r.avg_gap = ab.bound - l_avg_parent;
    r.objective_bound_holds = j_parent <= r.j_bound;
    r.average_bound_holds = l_avg_parent <= r.l_avg_bound;

    TrajectoryRecord lrec = evaluate_trajectory(lifted, parent.config, ds);
    double j_lift = objective_from_trajectory(lrec, gamma, lambda);
    r.lift_identity_err =
        std::abs(j_lift - r.j_bound) / std::max(1.0, std::abs(r.j_bound));
    if (!(r.lift_identity_err <= 1e-10)) {
      throw NumericError("lifted child at depth " + std::to_string(M) +
                         " does not reproduce the closed-form bound: objective " +
                         std::to_string(j_lift) + " vs " + std::to_string(r.j_bound));
    }
    table.rows.push_back(r);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const BoundReport& a, const BoundReport& b) { return a.M < b.M; });
  return table;
}

std::string bounds_to_csv(const BoundTable& t) {
  std::ostringstream out;
  out << "M,L_bar,J_child,J_bound,gap_child,J_parent,gap_parent,L_avg_parent,C,"
         "L_avg_bound,avg_gap,objective_bound_holds,average_bound_holds,"
         "lift_identity_err\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << ',';
  };
  for (const BoundReport& r : t.rows) {
    out << r.M << ',';
    put(r.l_bar);
    put(r.j_child);
    put(r.j_bound);
    put(r.gap_child);
    put(r.j_parent);
    put(r.gap_parent);
    put(r.l_avg_parent);
    put(r.avg_constant);
    put(r.l_avg_bound);
    put(r.avg_gap);
    out << (r.objective_bound_holds ? 1 : 0) << ','
        << (r.average_bound_holds ? 1 : 0) << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.lift_identity_err);
    out << buf << '\n';
  }
  return out.str();
}

std::string bounds_to_text(const BoundTable& t) {
  std::ostringstream out;
  out << std::setw(4) << "M" << std::setw(11) << "L_bar" << std::setw(11) << "J_child"
      << std::setw(11) << "J_bound" << std::setw(11) << "gap" << std::setw(11) << "L_avg"
      << std::setw(13) << "L_avg_bound" << std::setw(11) << "avg_gap" << std::setw(8)
      << "obj_ok" << std::setw(8) << "avg_ok" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const BoundReport& r : t.rows) {
    out << std::setw(4) << r.M << std::setw(11) << r.l_bar << std::setw(11) << r.j_child
        << std::setw(11) << r.j_bound << std::setw(11) << r.gap_child << std::setw(11)
        << r.l_avg_parent << std::setw(13) << r.l_avg_bound << std::setw(11) << r.avg_gap
        << std::setw(8) << (r.objective_bound_holds ? "yes" : "no") << std::setw(8)
        << (r.average_bound_holds ? "yes" : "no") << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out << std::setprecision(6);
  out << "full depth " << t.parent_depth << ", stage weight " << t.gamma << ", decay "
      << t.lambda << ", split " << t.split << '\n';
  if (!t.note.empty()) out << "note: " << t.note << '\n';
  return out.str();
}

}  // namespace stagecost
