#include "stagecost.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "stagecost/bounds.hpp"
#include "stagecost/checkpoint.hpp"
#include "stagecost/commands.hpp"
#include "stagecost/data.hpp"
#include "stagecost/errors.hpp"
#include "stagecost/fsio.hpp"
#include "stagecost/subresnet.hpp"
#include "stagecost/trajectory_io.hpp"
#include "stagecost/training.hpp"

struct sc_dataset {
  stagecost::Dataset ds;
};
struct sc_model {
  stagecost::Model m;
};
struct sc_trajectory {
  stagecost::TrajectoryRecord rec;
};
struct sc_bound_table {
  stagecost::BoundTable t;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Runs the body and folds its exceptions onto the status codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return SC_OK;
  } catch (const stagecost::ValidationError& e) {
    return set_error(SC_ERR_CONFIG, e.what());
  } catch (const stagecost::NumericError& e) {
    return set_error(SC_ERR_NUMERIC, e.what());
  } catch (const stagecost::IoError& e) {
    return set_error(SC_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return set_error(SC_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(SC_ERR_INTERNAL, "unknown error");
  }
}

int need(bool ok, const char* what) {
  if (ok) return SC_OK;
  return set_error(SC_ERR_CONFIG, std::string("null ") + what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string or_empty(const char* s) { return s == nullptr ? std::string() : std::string(s); }

std::string trajectory_csv_text(const stagecost::TrajectoryRecord& rec) {
  return stagecost::trajectory_csv_header(false) + "\n" +
         stagecost::trajectory_csv_rows(rec, false);
}

// Resolves a dataset for command wrappers: explicit uri, else the one the
// checkpoint remembers.
stagecost::Dataset resolve_dataset(const char* uri, const char* split,
                                   const char* fallback_split, const stagecost::Model& m) {
  std::string u = or_empty(uri);
  if (u.empty()) u = m.meta.dataset_uri;
  if (u.empty()) {
    throw stagecost::ValidationError(
        "no dataset: the checkpoint stores no dataset uri, pass one explicitly");
  }
  std::string sp = or_empty(split);
  if (sp.empty()) sp = fallback_split;
  return stagecost::open_dataset(u, sp);
}

}  // namespace

extern "C" {

const char* sc_version(void) { return "1.0.0"; }

const char* sc_last_error(void) { return g_last_error.c_str(); }

void sc_string_free(char* s) { std::free(s); }

int sc_dataset_open(const char* uri, const char* split, sc_dataset** out) {
  if (int rc = need(uri && split && out, "argument")) return rc;
  return guarded([&] {
    auto* h = new sc_dataset{stagecost::open_dataset(uri, split)};
    *out = h;
  });
}

void sc_dataset_free(sc_dataset* ds) { delete ds; }

int64_t sc_dataset_size(const sc_dataset* ds) { return ds == nullptr ? -1 : ds->ds.size(); }

int64_t sc_dataset_input_dim(const sc_dataset* ds) { return ds == nullptr ? -1 : ds->ds.dim(); }

int64_t sc_dataset_num_classes(const sc_dataset* ds) {
  return ds == nullptr ? -1 : ds->ds.num_classes;
}

const char* sc_dataset_normalization(const sc_dataset* ds) {
  return ds == nullptr ? nullptr : ds->ds.normalization.c_str();
}

int sc_model_load(const char* path, sc_model** out) {
  if (int rc = need(path && out, "argument")) return rc;
  return guarded([&] {
    auto* h = new sc_model{stagecost::load_model(path)};
    *out = h;
  });
}

int sc_model_save(const sc_model* m, const char* path) {
  if (int rc = need(m && path, "argument")) return rc;
  return guarded([&] { stagecost::save_model(m->m, path); });
}

void sc_model_free(sc_model* m) { delete m; }

int64_t sc_model_depth(const sc_model* m) { return m == nullptr ? -1 : m->m.config.depth; }

int64_t sc_model_param_count(const sc_model* m) {
  return m == nullptr ? -1 : stagecost::param_count(m->m.weights);
}

const char* sc_model_dataset_uri(const sc_model* m) {
  return m == nullptr ? nullptr : m->m.meta.dataset_uri.c_str();
}

int sc_model_summary(const sc_model* m, char** out) {
  if (int rc = need(m && out, "argument")) return rc;
  return guarded([&] {
    const stagecost::NetworkConfig& cfg = m->m.config;
    const stagecost::ModelMeta& meta = m->m.meta;
    std::ostringstream s;
    s << "depth " << cfg.depth << ", input_dim " << cfg.input_dim << ", outputs "
      << cfg.num_outputs << "\nwidths";
    for (int64_t w : cfg.widths) s << ' ' << w;
    s << "\nloss " << (cfg.loss_kind == stagecost::LossKind::kCrossEntropy ? "cross_entropy" : "l2")
      << ", exit_mode "
      << (cfg.exit_mode == stagecost::ExitMode::kWeightShared ? "weight_shared" : "extra_params")
      << ", hidden_multiplier " << cfg.hidden_multiplier;
    if (!cfg.head_chain_widths.empty()) {
      s << "\nhead_chain_widths";
      for (int64_t w : cfg.head_chain_widths) s << ' ' << w;
    }
    s << "\n" << stagecost::param_count(m->m.weights) << " parameters\n";
    s << "training_mode " << meta.training_mode << ", gamma " << meta.train.gamma << ", lambda "
      << meta.train.lambda << ", seed " << meta.train.seed << ", epoch " << meta.epoch << "\n";
    s << "dataset " << (meta.dataset_uri.empty() ? "(none)" : meta.dataset_uri)
      << ", normalization " << meta.normalization << "\n";
    *out = dup_string(s.str());
  });
}

int sc_model_evaluate(const sc_model* m, const sc_dataset* ds, sc_trajectory** out) {
  if (int rc = need(m && ds && out, "argument")) return rc;
  return guarded([&] {
    auto* h = new sc_trajectory{
        stagecost::evaluate_trajectory(m->m.weights, m->m.config, ds->ds)};
    *out = h;
  });
}

void sc_trajectory_free(sc_trajectory* t) { delete t; }

int64_t sc_trajectory_depth(const sc_trajectory* t) { return t == nullptr ? -1 : t->rec.depth; }

int sc_trajectory_row(const sc_trajectory* t, int64_t k, double* loss, double* accuracy,
                      double* param_norm_sq, double* output_residual_norm) {
  if (int rc = need(t != nullptr, "trajectory")) return rc;
  if (k < 0 || k > t->rec.depth) {
    return set_error(SC_ERR_CONFIG, "trajectory row " + std::to_string(k) + " out of range 0.." +
                                        std::to_string(t->rec.depth));
  }
  auto i = static_cast<size_t>(k);
  double nan = std::numeric_limits<double>::quiet_NaN();
  if (loss != nullptr) *loss = t->rec.losses[i];
  if (accuracy != nullptr) *accuracy = t->rec.accuracies[i];
  bool block_row = k < t->rec.depth;
  if (param_norm_sq != nullptr) *param_norm_sq = block_row ? t->rec.param_norms_sq[i] : nan;
  if (output_residual_norm != nullptr) {
    *output_residual_norm = block_row ? t->rec.residual_norms[i] : nan;
  }
  return SC_OK;
}

int sc_trajectory_csv(const sc_trajectory* t, char** out) {
  if (int rc = need(t && out, "argument")) return rc;
  return guarded([&] { *out = dup_string(trajectory_csv_text(t->rec)); });
}

int sc_trajectory_write_csv(const sc_trajectory* t, const char* path) {
  if (int rc = need(t && path, "argument")) return rc;
  return guarded(
      [&] { stagecost::write_file_atomic(path, trajectory_csv_text(t->rec), "trajectory csv"); });
}

int sc_trajectory_plateau_depth(const sc_trajectory* t, double tolerance, int64_t* out) {
  if (int rc = need(t && out, "argument")) return rc;
  return guarded([&] { *out = stagecost::plateau_depth(t->rec, tolerance); });
}

int sc_model_prune(const sc_model* m, int64_t depth, sc_model** out) {
  if (int rc = need(m && out, "argument")) return rc;
  return guarded([&] {
    auto* h = new sc_model{stagecost::prune(m->m, depth)};
    *out = h;
  });
}

int sc_bounds_audit(const sc_model* parent, const sc_model* const* children, int64_t n_children,
                    const sc_dataset* ds, sc_bound_table** out) {
  if (int rc = need(parent && ds && out && (n_children == 0 || children), "argument")) return rc;
  return guarded([&] {
    std::vector<stagecost::Model> kids;
    kids.reserve(static_cast<size_t>(n_children));
    for (int64_t i = 0; i < n_children; ++i) {
      if (children[i] == nullptr) throw stagecost::ValidationError("null child model");
      kids.push_back(children[i]->m);
    }
    auto* h = new sc_bound_table{stagecost::audit_bounds(
        parent->m, kids, ds->ds, parent->m.meta.train.gamma, parent->m.meta.train.lambda)};
    *out = h;
  });
}

void sc_bound_table_free(sc_bound_table* t) { delete t; }

int64_t sc_bound_table_rows(const sc_bound_table* t) {
  return t == nullptr ? -1 : static_cast<int64_t>(t->t.rows.size());
}

int sc_bound_table_row(const sc_bound_table* t, int64_t i, sc_bound_row* out) {
  if (int rc = need(t && out, "argument")) return rc;
  if (i < 0 || i >= static_cast<int64_t>(t->t.rows.size())) {
    return set_error(SC_ERR_CONFIG, "bound table row " + std::to_string(i) + " out of range");
  }
  const stagecost::BoundReport& r = t->t.rows[static_cast<size_t>(i)];
  out->depth = r.M;
  out->l_bar = r.l_bar;
  out->j_child = r.j_child;
  out->j_bound = r.j_bound;
  out->j_parent = r.j_parent;
  out->gap_child = r.gap_child;
  out->gap_parent = r.gap_parent;
  out->l_avg_parent = r.l_avg_parent;
  out->avg_constant = r.avg_constant;
  out->l_avg_bound = r.l_avg_bound;
  out->avg_gap = r.avg_gap;
  out->objective_bound_holds = r.objective_bound_holds ? 1 : 0;
  out->average_bound_holds = r.average_bound_holds ? 1 : 0;
  out->lift_identity_err = r.lift_identity_err;
  return SC_OK;
}

int sc_bound_table_text(const sc_bound_table* t, char** out) {
  if (int rc = need(t && out, "argument")) return rc;
  return guarded([&] { *out = dup_string(stagecost::bounds_to_text(t->t)); });
}

int sc_bound_table_csv(const sc_bound_table* t, char** out) {
  if (int rc = need(t && out, "argument")) return rc;
  return guarded([&] { *out = dup_string(stagecost::bounds_to_csv(t->t)); });
}

int sc_cmd_train(const char* config_path, const char* out_dir, int64_t seed_override,
                 char** summary) {
  if (int rc = need(config_path != nullptr, "config path")) return rc;
  return guarded([&] {
    stagecost::RunConfig rc = stagecost::load_run_config(config_path);
    if (out_dir != nullptr && out_dir[0] != '\0') rc.out_dir = out_dir;
    if (seed_override >= 0) rc.train.seed = static_cast<uint64_t>(seed_override);
    stagecost::TrainArtifacts art = stagecost::cmd_train(rc);
    if (summary != nullptr) *summary = dup_string(art.summary);
  });
}

int sc_cmd_eval(const char* checkpoint, const char* dataset_uri, const char* split,
                const char* out_csv, char** summary) {
  if (int rc = need(checkpoint != nullptr, "checkpoint path")) return rc;
  return guarded([&] {
    stagecost::Model m = stagecost::load_model(checkpoint);
    stagecost::Dataset ds = resolve_dataset(dataset_uri, split, "test", m);
    stagecost::EvalReport rep = stagecost::cmd_eval(m, ds, or_empty(out_csv));
    if (summary != nullptr) *summary = dup_string(rep.summary);
  });
}

int sc_cmd_prune(const char* checkpoint, int64_t depth, int auto_select, double tolerance,
                 const char* dataset_uri, const char* split, const char* out_dir,
                 int64_t* chosen_depth, char** report) {
  if (int rc = need(checkpoint != nullptr, "checkpoint path")) return rc;
  return guarded([&] {
    stagecost::Model m = stagecost::load_model(checkpoint);
    stagecost::Dataset ds;
    const stagecost::Dataset* dsp = nullptr;
    bool want_ds = (dataset_uri != nullptr && dataset_uri[0] != '\0') || auto_select != 0;
    if (want_ds) {
      ds = resolve_dataset(dataset_uri, split, "test", m);
      dsp = &ds;
    }
    stagecost::PruneReport rep =
        stagecost::cmd_prune(m, depth, auto_select != 0, tolerance, dsp, or_empty(out_dir));
    if (chosen_depth != nullptr) *chosen_depth = rep.chosen_depth;
    if (report != nullptr) *report = dup_string(rep.report);
  });
}

int sc_cmd_bounds(const char* parent, const char* const* children, int64_t n_children,
                  const char* dataset_uri, const char* split, const char* out_csv,
                  char** table_text) {
  if (int rc = need(parent && (n_children == 0 || children), "argument")) return rc;
  return guarded([&] {
    stagecost::Model parent_m = stagecost::load_model(parent);
    std::vector<stagecost::Model> kids;
    kids.reserve(static_cast<size_t>(n_children));
    for (int64_t i = 0; i < n_children; ++i) {
      if (children[i] == nullptr) throw stagecost::ValidationError("null child checkpoint path");
      kids.push_back(stagecost::load_model(children[i]));
    }
    stagecost::Dataset ds = resolve_dataset(dataset_uri, split, "train", parent_m);
    stagecost::BoundsReport rep = stagecost::cmd_bounds(parent_m, kids, ds, or_empty(out_csv));
    if (table_text != nullptr) *table_text = dup_string(rep.text);
  });
}

}  // extern "C"
