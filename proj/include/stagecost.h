/* C interface to the stagecost library.
 *
 * Every fallible call returns a status code; 0 is success. On failure the
 * thread-local message from sc_last_error() says what went wrong. Objects
 * are opaque handles created through *_open/_load/_audit calls and released
 * with the matching *_free; strings returned through char** out-parameters
 * are released with sc_string_free.
 */
#ifndef STAGECOST_H
#define STAGECOST_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
  SC_OK = 0,
  SC_ERR_INTERNAL = 1, /* unexpected failure */
  SC_ERR_CONFIG = 2,   /* invalid configuration or arguments */
  SC_ERR_NUMERIC = 3,  /* non-finite values or a broken numeric identity */
  SC_ERR_IO = 4        /* missing, unreadable, or corrupt files */
};

const char* sc_version(void);

/* Message of the most recent failure on the calling thread; never NULL. */
const char* sc_last_error(void);

void sc_string_free(char* s);

typedef struct sc_dataset sc_dataset;
typedef struct sc_model sc_model;
typedef struct sc_trajectory sc_trajectory;
typedef struct sc_bound_table sc_bound_table;

/* Datasets. URI forms:
 *   blobs://classes/per_class/dim/spread/seed   synthetic Gaussian clusters
 *   mnist://directory                           IDX files, canonical names
 * split is "train" or "test". */
int sc_dataset_open(const char* uri, const char* split, sc_dataset** out);
void sc_dataset_free(sc_dataset* ds);
int64_t sc_dataset_size(const sc_dataset* ds);
int64_t sc_dataset_input_dim(const sc_dataset* ds);
int64_t sc_dataset_num_classes(const sc_dataset* ds);
/* Owned by the dataset; valid until sc_dataset_free. */
const char* sc_dataset_normalization(const sc_dataset* ds);

/* Models (checkpoint files). */
int sc_model_load(const char* path, sc_model** out);
int sc_model_save(const sc_model* m, const char* path);
void sc_model_free(sc_model* m);
int64_t sc_model_depth(const sc_model* m);
int64_t sc_model_param_count(const sc_model* m);
/* Owned by the model; valid until sc_model_free. */
const char* sc_model_dataset_uri(const sc_model* m);
int sc_model_summary(const sc_model* m, char** out);

/* Per-depth losses, accuracies, residual-branch norms, and output-residual
 * norms of a model on a dataset. Rows k = 0..depth; the two block metrics
 * are NaN on the final row. */
int sc_model_evaluate(const sc_model* m, const sc_dataset* ds, sc_trajectory** out);
void sc_trajectory_free(sc_trajectory* t);
int64_t sc_trajectory_depth(const sc_trajectory* t);
int sc_trajectory_row(const sc_trajectory* t, int64_t k, double* loss, double* accuracy,
                      double* param_norm_sq, double* output_residual_norm);
int sc_trajectory_csv(const sc_trajectory* t, char** out);
int sc_trajectory_write_csv(const sc_trajectory* t, const char* path);
/* Smallest depth after which the trajectory stops improving at the given
 * relative tolerance. */
int sc_trajectory_plateau_depth(const sc_trajectory* t, double tolerance, int64_t* out);

/* Cuts the model to its first `depth` blocks plus the matching exit head. */
int sc_model_prune(const sc_model* m, int64_t depth, sc_model** out);

/* Loss-bound audit of child models against a parent. The stage weight and
 * decay coefficient come from the parent's training metadata; the parent
 * must have been trained with a stage weight in (0, 1]. */
int sc_bounds_audit(const sc_model* parent, const sc_model* const* children,
                    int64_t n_children, const sc_dataset* ds, sc_bound_table** out);
void sc_bound_table_free(sc_bound_table* t);
int64_t sc_bound_table_rows(const sc_bound_table* t);

typedef struct sc_bound_row {
  int64_t depth;                 /* child depth M */
  double l_bar;                  /* child terminal loss */
  double j_child;                /* child stage-cost objective */
  double j_bound;                /* closed-form objective bound */
  double j_parent;               /* parent stage-cost objective */
  double gap_child;              /* j_bound - j_child */
  double gap_parent;             /* j_bound - j_parent */
  double l_avg_parent;           /* parent mean exit loss */
  double avg_constant;           /* additive constant of the average bound */
  double l_avg_bound;            /* bound on the parent mean exit loss */
  double avg_gap;                /* l_avg_bound - l_avg_parent */
  int objective_bound_holds;     /* j_parent <= j_bound */
  int average_bound_holds;       /* l_avg_parent <= l_avg_bound */
  double lift_identity_err;      /* relative feasible-point error, <= 1e-10 */
} sc_bound_row;

int sc_bound_table_row(const sc_bound_table* t, int64_t i, sc_bound_row* out);
int sc_bound_table_text(const sc_bound_table* t, char** out);
int sc_bound_table_csv(const sc_bound_table* t, char** out);

/* Whole commands, as run by the CLI. Each writes its artifacts and hands
 * back a printable report through the char** out-parameter.
 *
 * sc_cmd_train: config_path names a run-config file; out_dir, when
 * non-NULL, overrides the config's output directory, and a non-negative
 * seed_override replaces the config's seed.
 *
 * sc_cmd_eval: NULL dataset_uri replays the checkpoint's stored dataset;
 * NULL split means "test"; NULL out_csv skips the file.
 *
 * sc_cmd_prune: depth is ignored when auto_select is nonzero, in which case
 * tolerance picks the cut from the trajectory on a dataset (the given one,
 * else the checkpoint's stored one). In fixed-depth mode a NULL dataset_uri
 * just skips the accuracy comparison. A non-NULL out_dir receives the child
 * checkpoint as pruned_depth<M>.sckp; chosen_depth, when non-NULL, reports
 * M.
 *
 * sc_cmd_bounds: NULL dataset_uri replays the parent's stored dataset; NULL
 * split means "train"; NULL out_csv skips the file. */
int sc_cmd_train(const char* config_path, const char* out_dir, int64_t seed_override,
                 char** summary);
int sc_cmd_eval(const char* checkpoint, const char* dataset_uri, const char* split,
                const char* out_csv, char** summary);
int sc_cmd_prune(const char* checkpoint, int64_t depth, int auto_select, double tolerance,
                 const char* dataset_uri, const char* split, const char* out_dir,
                 int64_t* chosen_depth, char** report);
int sc_cmd_bounds(const char* parent, const char* const* children, int64_t n_children,
                  const char* dataset_uri, const char* split, const char* out_csv,
                  char** table_text);

#ifdef __cplusplus
}
#endif

#endif /* STAGECOST_H */
