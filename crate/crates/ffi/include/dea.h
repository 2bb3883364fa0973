/* C interface for the dea training library. */

#ifndef DEA_FFI_H
#define DEA_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum DeaStatus {
  DEA_STATUS_OK = 0,
  DEA_STATUS_NULL_POINTER = 1,
  DEA_STATUS_INVALID_UTF8 = 2,
  DEA_STATUS_INVALID_CONFIG = 3,
  // The run aborted on a non-finite loss or target.
  DEA_STATUS_NON_FINITE = 4,
  DEA_STATUS_IO = 5,
  DEA_STATUS_INDEX_OUT_OF_RANGE = 6,
  DEA_STATUS_PANIC = 7,
} DeaStatus;

// Opaque resolved run configuration.
typedef struct DeaConfig DeaConfig;

// Opaque finished run: evaluation checkpoints, directional-parameter
// trajectory, and update accounting.
typedef struct DeaRun DeaRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL when the
// last call succeeded. The pointer stays valid until the next failing
// call on the same thread.
const char *dea_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dea_version(void);

// Parse a TOML configuration document (same schema as the CLI accepts)
// into a resolved config handle.
//
// # Safety
// `toml_text` must be a valid NUL-terminated string; `out` must be a
// valid pointer.
enum DeaStatus dea_config_parse(const char *toml_text, struct DeaConfig **out);

// Default configuration (pendulum, dea, desk-interactive regime).
//
// # Safety
// `out` must be a valid pointer.
enum DeaStatus dea_config_default(struct DeaConfig **out);

// Override the run seed on an existing config handle.
//
// # Safety
// `cfg` must be a live handle from `dea_config_parse` or
// `dea_config_default`.
enum DeaStatus dea_config_set_seed(struct DeaConfig *cfg, uint64_t seed);

// Release a config handle. NULL is accepted.
//
// # Safety
// `cfg` must be NULL or a live handle; it must not be used afterwards.
void dea_config_free(struct DeaConfig *cfg);

// Run one full training run. Blocks until the run finishes; artifacts
// are also written to `out_dir` when the config names one.
//
// # Safety
// `cfg` must be a live config handle; `out` must be a valid pointer.
enum DeaStatus dea_train(const struct DeaConfig *cfg, struct DeaRun **out);

// Number of evaluation checkpoints recorded by the run.
//
// # Safety
// `run` must be a live run handle.
size_t dea_run_eval_count(const struct DeaRun *run);

// Read one evaluation checkpoint.
//
// # Safety
// `run` must be a live run handle; the out-pointers must be valid.
enum DeaStatus dea_run_eval_at(const struct DeaRun *run,
                               size_t index,
                               uint64_t *step,
                               double *mean_return,
                               double *std_return);

// Mean evaluation return at the final checkpoint (NaN when the run never
// evaluated).
//
// # Safety
// `run` must be a live run handle.
double dea_run_final_return(const struct DeaRun *run);

// Number of per-step directional-parameter records (0 unless the method
// was `dea`).
//
// # Safety
// `run` must be a live run handle.
size_t dea_run_kappa_count(const struct DeaRun *run);

// Read one directional-parameter record.
//
// # Safety
// `run` must be a live run handle; the out-pointers must be valid.
enum DeaStatus dea_run_kappa_at(const struct DeaRun *run,
                                size_t index,
                                uint64_t *step,
                                double *kappa_bar,
                                double *kappa,
                                double *delta_mean,
                                double *delta_bar_mean);

// Release a run handle. NULL is accepted.
//
// # Safety
// `run` must be NULL or a live handle; it must not be used afterwards.
void dea_run_free(struct DeaRun *run);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DEA_FFI_H */
