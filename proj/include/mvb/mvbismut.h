#ifndef MVBISMUT_H
#define MVBISMUT_H

/* C interface to the mvbismut library. Handles are opaque; every function
 * returning mvb_status leaves a message for mvb_last_error() on failure.
 * Strings returned by the library are owned by the handle they came from. */

#include <stddef.h>
#include <stdint.h>

#if defined(MVB_BUILDING_LIBRARY)
#define MVB_API __attribute__((visibility("default")))
#else
#define MVB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mvb_status {
  MVB_OK = 0,
  MVB_ERR_INVALID_ARGUMENT = 10,
  MVB_ERR_CONFIG = 11,
  MVB_ERR_UNKNOWN_FAMILY = 12,
  MVB_ERR_IO = 13,
  MVB_ERR_SINGULAR_DIFFUSION = 20,
  MVB_ERR_NON_FINITE = 21,
  MVB_ERR_MEMORY_BUDGET = 22,
  MVB_ERR_UNEQUAL_SUPPORT = 30,
  MVB_ERR_SIZE_CAP = 31,
  MVB_ERR_GRID_MISMATCH = 40,
  MVB_ERR_MISSING_GRAD_SIGMA = 41,
  MVB_ERR_SCHEDULE_MISMATCH = 42,
  MVB_ERR_MEASURE_DEPENDENCE = 43,
  MVB_ERR_UNSUPPORTED_SCENARIO = 44,
  MVB_ERR_INTERNAL = 99
} mvb_status;

typedef struct mvb_config mvb_config;
typedef struct mvb_report mvb_report;
typedef struct mvb_measure mvb_measure;

MVB_API const char* mvb_version(void);
/* Message of the last failure on the calling thread ("" if none). */
MVB_API const char* mvb_last_error(void);
MVB_API const char* mvb_status_name(mvb_status status);

/* Accepts INI text or a run manifest. */
MVB_API mvb_status mvb_config_load(const char* path, mvb_config** out);
MVB_API mvb_status mvb_config_parse(const char* text, mvb_config** out);
MVB_API mvb_status mvb_config_set_seed(mvb_config* cfg, uint64_t seed);
MVB_API mvb_status mvb_config_set_out_dir(mvb_config* cfg, const char* dir);
MVB_API mvb_status mvb_config_validate(const mvb_config* cfg);
/* Normalized config text. */
MVB_API const char* mvb_config_text(const mvb_config* cfg);
MVB_API void mvb_config_free(mvb_config* cfg);

/* Runs the suite. A report is produced for every outcome, including config
 * errors; check mvb_report_exit_code. write_files = 0 keeps output in memory. */
MVB_API mvb_status mvb_run(const mvb_config* cfg, int parallel, int write_files,
                           mvb_report** out);
MVB_API int mvb_report_exit_code(const mvb_report* report);
MVB_API size_t mvb_report_row_count(const mvb_report* report);
MVB_API const char* mvb_report_csv(const mvb_report* report);
MVB_API const char* mvb_report_manifest(const mvb_report* report);
/* JSON error record, "" when the run passed. */
MVB_API const char* mvb_report_error(const mvb_report* report);
MVB_API void mvb_report_free(mvb_report* report);

MVB_API const char* mvb_scenario_table(void);

/* Empirical measures: row-major n x dim data. */
MVB_API mvb_status mvb_measure_create(size_t dim, size_t n, const double* data, mvb_measure** out);
MVB_API mvb_status mvb_measure_from_csv(const char* text, mvb_measure** out);
MVB_API size_t mvb_measure_size(const mvb_measure* mu);
MVB_API size_t mvb_measure_dim(const mvb_measure* mu);
MVB_API const double* mvb_measure_data(const mvb_measure* mu);
MVB_API const char* mvb_measure_csv(mvb_measure* mu);
MVB_API mvb_status mvb_wasserstein(const mvb_measure* a, const mvb_measure* b, double k,
                                   double* out);
MVB_API void mvb_measure_free(mvb_measure* mu);

#ifdef __cplusplus
}
#endif

#endif
