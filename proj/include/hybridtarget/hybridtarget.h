#ifndef HYBRIDTARGET_H
#define HYBRIDTARGET_H

#include <stddef.h>
#include <stdint.h>

#if defined(HT_BUILDING_LIBRARY)
#define HT_API __attribute__((visibility("default")))
#else
#define HT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ht_status {
    HT_OK = 0,
    HT_INVALID_ARGUMENT = 1,
    HT_INVALID_CONFIG = 2,
    HT_IO = 3,
    HT_MISSING_COLUMN = 4,
    HT_NON_NUMERIC_COVARIATE = 5,
    HT_DUPLICATE_HOUSEHOLD_ID = 6,
    HT_NOT_A_PERMUTATION = 7,
    HT_UNKNOWN_HOUSEHOLD = 8,
    HT_COMMUNITY_MISMATCH = 9,
    HT_ZERO_VARIANCE_COLUMN = 10,
    HT_EMPTY_INTERVAL = 11,
    HT_INVALID_PARAM = 12,
    HT_NOT_POSITIVE_DEFINITE = 13,
    HT_INVALID_PROBABILITIES = 14,
    HT_DIVERGENT_CHAIN = 15,
    HT_INSUFFICIENT_SAMPLES = 16,
    HT_INVALID_QUOTA = 17,
    HT_ALL_SAME_OUTCOME = 18,
    HT_RANK_DEFICIENT = 19,
    HT_DIMENSION_MISMATCH = 20,
    HT_QUOTA_MISMATCH = 21,
    HT_NOT_ENOUGH_COMMUNITIES = 22,
    HT_ALL_ZERO = 23,
    HT_SET_MISMATCH = 24,
    HT_UNKNOWN_COMMUNITY = 25,
    HT_INTERNAL = 26
} ht_status;

/* Message for the most recent failure on the calling thread ("" if none). */
HT_API const char* ht_last_error(void);
HT_API const char* ht_status_name(ht_status status);
HT_API const char* ht_version(void);

/* Nonzero for statuses caused by bad configuration or arguments rather than
 * by the data or the computation. */
HT_API int ht_status_is_usage_error(ht_status status);

typedef struct ht_dataset ht_dataset;
typedef struct ht_fit_config ht_fit_config;
typedef struct ht_posterior ht_posterior;

/* survey and quotas may be NULL. */
HT_API ht_status ht_dataset_load(const char* census_path, const char* rankings_path, const char* survey_path,
                                 const char* quotas_path, ht_dataset** out);
HT_API ht_status ht_dataset_counts(const ht_dataset* data, size_t* households, size_t* covariates,
                                   size_t* rankings, size_t* survey_rows);
HT_API void ht_dataset_free(ht_dataset* data);

/* config_path may be NULL for the defaults. */
HT_API ht_status ht_fit_config_load(const char* config_path, ht_fit_config** out);
HT_API ht_status ht_fit_config_set_iterations(ht_fit_config* cfg, int total, int burn_in);
HT_API ht_status ht_fit_config_set_flag(ht_fit_config* cfg, const char* name, int value);
/* Use the priors in a file written by ht_update_prior. */
HT_API ht_status ht_fit_config_apply_prior(ht_fit_config* cfg, const char* prior_path);
HT_API void ht_fit_config_free(ht_fit_config* cfg);

HT_API ht_status ht_fit(const ht_dataset* data, const ht_fit_config* cfg, uint64_t seed, ht_posterior** out);
HT_API ht_status ht_posterior_load(const char* samples_path, ht_posterior** out);
HT_API ht_status ht_posterior_dims(const ht_posterior* post, size_t* draws, size_t* covariates, size_t* rankers);
/* Copies the posterior mean of the coefficients into out[0..len). */
HT_API ht_status ht_posterior_delta_mean(const ht_posterior* post, double* out, size_t len);
HT_API ht_status ht_posterior_omega_mean(const ht_posterior* post, double* out, size_t len);
/* Writes coefficients.csv, standardized_coefs.csv, scaling.csv, fit.log and,
 * for fitted multi-ranker models, correlations.csv; samples.csv when
 * write_samples is nonzero. */
HT_API ht_status ht_posterior_write(const ht_posterior* post, const char* out_dir, int write_samples);
HT_API void ht_posterior_free(ht_posterior* post);

/* Synthetic data: census.csv, rankings.csv, survey.csv, quotas.csv, truth.csv.
 * config_path may be NULL; seed overrides the config seed when non-NULL. */
HT_API ht_status ht_generate(const char* config_path, const uint64_t* seed, const char* out_dir);

/* Score census households with the posterior means in coefficients_path and
 * select the lowest scores per community. scaling_path and quotas_path may be
 * NULL (no rescaling; quota_share of each community). */
HT_API ht_status ht_score(const char* coefficients_path, const char* census_path, const char* scaling_path,
                          const char* quotas_path, double quota_share, int drop_elite, const char* out_path);

/* Replication experiment; writes errors.csv and summary.csv. threads <= 0
 * keeps the plan's setting. survey, quotas and truth may be NULL. */
HT_API ht_status ht_evaluate(const char* plan_path, const char* census_path, const char* rankings_path,
                             const char* survey_path, const char* quotas_path, const char* truth_path,
                             const uint64_t* seed, int threads, const char* out_dir);

/* Priors for the next period from a samples.csv dump. */
HT_API ht_status ht_update_prior(const char* samples_path, double inflation, double shrink, const char* out_path);

/* manifest.json with SHA-256 hashes of the inputs and of every regular file
 * in out_dir. config_path may be NULL. */
HT_API ht_status ht_write_manifest(const char* out_dir, const char* command, const char* config_path,
                                   const char* const* input_paths, size_t n_inputs, const uint64_t* seed,
                                   const char* started_at);

#ifdef __cplusplus
}
#endif

#endif
