/* pslab C API: propensity-score lasso toolkit.
 *
 * All functions return PSLAB_OK (0) on success or a nonzero error code;
 * pslab_last_error() returns a thread-local message for the most recent
 * failure on the calling thread. Objects are opaque handles released with
 * their _free function.
 */
#ifndef PSLAB_H
#define PSLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define PSLAB_OK 0
#define PSLAB_ERR_CONFIG 2  /* bad arguments, bad config, bad input file */
#define PSLAB_ERR_RUNTIME 3 /* failure while computing or writing output */

const char* pslab_last_error(void);

typedef struct pslab_dataset pslab_dataset;

int pslab_dataset_load(const char* csv_path, const char* outcome_col,
                       const char* exposure_col, pslab_dataset** out);
void pslab_dataset_free(pslab_dataset* ds);
int pslab_dataset_dims(const pslab_dataset* ds, int64_t* n, int64_t* d);
int pslab_dataset_n_exposed(const pslab_dataset* ds, int64_t* n_exposed);

/* Writes <out_dir>/data.csv and <out_dir>/truth.csv.
 * setup is "setup1" or "setup2". */
int pslab_simulate(const char* setup, int64_t n, uint64_t seed,
                   const char* out_dir);

typedef struct {
  int n_lambda;            /* default 100 */
  double lambda_min_ratio; /* default 1e-4 */
  int n_folds;             /* default 10 */
  uint64_t fold_seed;
  int use_hal;             /* expand covariates into indicator basis */
  int hal_max_degree;      /* default 2 */
  int hal_knots_per_cov;   /* default 10 */
  int dump_coefs;          /* wide coefficient dump in path.csv */
} pslab_fit_options;

void pslab_fit_options_init(pslab_fit_options* opt);

/* Fits the regularization path with cross-validation and writes
 * <out_dir>/path.csv. */
int pslab_fit(const pslab_dataset* ds, const pslab_fit_options* opt,
              const char* out_dir);

typedef struct {
  double estimate;
  double se;
  double ci_low;
  double ci_high;
  double chosen_lambda;
  double lambda_cv;
  int64_t chosen_index;
  double max_weight;
} pslab_estimate_result;

/* tuner: "cv" | "max_smd" | "mean_smd"; scheme: "IPW" | "MW" | "OW".
 * Writes <out_dir>/estimate.csv when out_dir is non-NULL. */
int pslab_estimate(const pslab_dataset* ds, const char* tuner,
                   const char* scheme, const pslab_fit_options* opt,
                   const char* out_dir, pslab_estimate_result* result);

/* Algorithm-1 synthetic negative-control bias detection.
 * analyses: comma-separated "tuner:scheme" pairs, e.g. "cv:IPW,max_smd:IPW".
 * target_sum_formula: "text" (exposed proportion) or "printed".
 * Writes <out_dir>/synthetic_report.csv. */
int pslab_synthetic_nc(const pslab_dataset* ds, const char* analyses,
                       int k_cohorts, uint64_t seed,
                       const char* target_sum_formula,
                       const pslab_fit_options* opt, const char* out_dir,
                       int per_cohort_dump);

/* Monte Carlo experiment driven by a key = value config file. Writes
 * metrics.csv, balance_smd.csv, alignment.csv and run_meta.json under
 * out_dir. seed_override/threads_override take effect when > 0. */
int pslab_run_experiment(const char* config_path, const char* out_dir,
                         uint64_t seed_override, int threads_override);

#ifdef __cplusplus
}
#endif

#endif /* PSLAB_H */
