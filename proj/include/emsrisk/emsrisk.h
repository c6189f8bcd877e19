/* emsrisk C interface. Every call returns an emsrisk_status; on failure
 * emsrisk_last_error() describes the problem until the next call on the
 * same thread. Handles are opaque and owned by the caller. */
#ifndef EMSRISK_EMSRISK_H
#define EMSRISK_EMSRISK_H

#include <stddef.h>
#include <stdint.h>

#if defined(EMSRISK_BUILDING_LIBRARY)
#define EMSRISK_API __attribute__((visibility("default")))
#else
#define EMSRISK_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emsrisk_status {
  EMSRISK_OK = 0,
  EMSRISK_USAGE = 1,    /* bad arguments, invalid spec or configuration */
  EMSRISK_DATA = 2,     /* malformed or insufficient input data */
  EMSRISK_INTERNAL = 3, /* bug or resource failure */
} emsrisk_status;

typedef struct emsrisk_dataset emsrisk_dataset;
typedef struct emsrisk_risk_table emsrisk_risk_table;
typedef struct emsrisk_forest emsrisk_forest;

EMSRISK_API const char* emsrisk_version(void);
EMSRISK_API const char* emsrisk_last_error(void);
/* Warnings emitted since the last reset, process-wide. */
EMSRISK_API size_t emsrisk_warning_count(void);
EMSRISK_API void emsrisk_reset_warning_count(void);

/* ---- datasets ---------------------------------------------------------- */

/* `spec` is a preset name or the path of a JSON spec file. A nonzero
 * `seed` overrides the spec's seed. */
EMSRISK_API emsrisk_status emsrisk_dataset_generate(const char* spec, uint64_t seed, unsigned threads,
                                                    emsrisk_dataset** out);
EMSRISK_API emsrisk_status emsrisk_dataset_load(const char* dir, emsrisk_dataset** out);
EMSRISK_API emsrisk_status emsrisk_dataset_save(const emsrisk_dataset* ds, const char* dir);
EMSRISK_API void emsrisk_dataset_free(emsrisk_dataset* ds);

typedef struct emsrisk_dataset_info {
  size_t n_calls;          /* including excluded referrals */
  size_t n_excluded_calls;
  size_t n_regions;
  size_t n_venues;
  size_t n_checkins;
  double slot_positive_rate;
  char first_call[20]; /* YYYY-MM-DDTHH:00, empty without calls */
  char last_call[20];
} emsrisk_dataset_info;

EMSRISK_API emsrisk_status emsrisk_dataset_info_get(const emsrisk_dataset* ds, emsrisk_dataset_info* out);

/* Writes the effective JSON of a preset or spec file. */
EMSRISK_API emsrisk_status emsrisk_spec_write(const char* spec, uint64_t seed, const char* path);

/* ---- time-series stages ------------------------------------------------ */

/* Optional filters: nature 0 = all analysed natures, region/from/to NULL
 * = unbounded. Timestamps use YYYY-MM-DD[THH[:MM]]. */
typedef struct emsrisk_filter {
  int nature;
  const char* region_id;
  const char* from;
  const char* to;
} emsrisk_filter;

/* Daily series, CMA trend (window days), seasonality and irregular as CSV,
 * plus the 365 seasonal indices beside it when `indices_path` is set. */
EMSRISK_API emsrisk_status emsrisk_decompose_write(const emsrisk_dataset* ds, const emsrisk_filter* filter,
                                                   int window, const char* series_path, const char* indices_path);

/* Diurnal profile per nature and month, and weekly profile per nature.
 * `month` is YYYY-MM or NULL for every month with calls. */
EMSRISK_API emsrisk_status emsrisk_profiles_write(const emsrisk_dataset* ds, const char* month,
                                                  const char* diurnal_path, const char* weekly_path);

typedef enum emsrisk_stability_mode {
  EMSRISK_WITHIN_REGION_ACROSS_TIME = 0,
  EMSRISK_ACROSS_REGIONS = 1,
} emsrisk_stability_mode;

EMSRISK_API emsrisk_status emsrisk_stability_write(const emsrisk_dataset* ds, emsrisk_stability_mode mode,
                                                   size_t pairs_per_nature, uint64_t seed, const char* scores_path,
                                                   const char* summary_path);

/* ---- risk -------------------------------------------------------------- */

EMSRISK_API emsrisk_status emsrisk_risk_table_build(const emsrisk_dataset* ds, const char* from, const char* to,
                                                    emsrisk_risk_table** out);
EMSRISK_API void emsrisk_risk_table_free(emsrisk_risk_table* table);
EMSRISK_API size_t emsrisk_risk_table_size(const emsrisk_risk_table* table);

typedef struct emsrisk_risk_entry {
  int nature;
  const char* category; /* valid while the table lives */
  double sa;
  double ta;
  double st_risk;
} emsrisk_risk_entry;

EMSRISK_API emsrisk_status emsrisk_risk_table_entry(const emsrisk_risk_table* table, size_t index,
                                                    emsrisk_risk_entry* out);
EMSRISK_API emsrisk_status emsrisk_risk_table_write(const emsrisk_risk_table* table, const char* path);
/* Links with st_risk strictly greater than `threshold`. */
EMSRISK_API emsrisk_status emsrisk_sankey_write(const emsrisk_risk_table* table, double threshold,
                                                const char* path);

typedef enum emsrisk_rank_variant {
  EMSRISK_RANK_SPATIAL = 0,
  EMSRISK_RANK_TEMPORAL = 1,
  EMSRISK_RANK_SPATIOTEMPORAL = 2,
} emsrisk_rank_variant;

/* Top-k categories per nature for all three variants. */
EMSRISK_API emsrisk_status emsrisk_top_activities_write(const emsrisk_risk_table* table, size_t k,
                                                        const char* path);
EMSRISK_API emsrisk_status emsrisk_uar_write(const emsrisk_dataset* ds, const emsrisk_risk_table* table,
                                             const char* path);

/* ---- forests and evaluation -------------------------------------------- */

typedef struct emsrisk_model_options {
  size_t n_trees;
  size_t max_depth;
  size_t min_leaf;
  size_t mtry;         /* 0 = ceil(sqrt(features)) */
  uint64_t seed;       /* forest seed */
  uint64_t sample_seed; /* negative sampling seed */
  unsigned threads;
  const char* ablation; /* NULL, "drop:<group>" or "only:<group>" */
  size_t eval_weeks;
  int64_t retrain_every; /* hours */
  int64_t warmup_hours;
  double negative_ratio;
} emsrisk_model_options;

EMSRISK_API void emsrisk_model_options_default(emsrisk_model_options* out);

/* Trains on every labelled example in the dataset. */
EMSRISK_API emsrisk_status emsrisk_forest_train(const emsrisk_dataset* ds, const emsrisk_model_options* options,
                                                emsrisk_forest** out);
EMSRISK_API emsrisk_status emsrisk_forest_save(const emsrisk_forest* forest, const char* path);
EMSRISK_API emsrisk_status emsrisk_forest_load(const char* path, emsrisk_forest** out);
EMSRISK_API emsrisk_status emsrisk_forest_importances_write(const emsrisk_forest* forest, const char* path);
EMSRISK_API void emsrisk_forest_free(emsrisk_forest* forest);

typedef struct emsrisk_metrics {
  double precision;
  int precision_defined;
  double recall;
  double auc;
  double accuracy;
  size_t n_test;
  size_t evaluated_hours;
  size_t retrains;
} emsrisk_metrics;

/* Walk-forward evaluation over the last `eval_weeks` weeks. Writes the
 * JSON report and the hour-of-week accuracy CSV; either path may be NULL.
 * `metrics` may be NULL. */
EMSRISK_API emsrisk_status emsrisk_evaluate(const emsrisk_dataset* ds, const emsrisk_model_options* options,
                                            const char* report_json, const char* report_csv,
                                            emsrisk_metrics* metrics);

#ifdef __cplusplus
}
#endif

#endif
