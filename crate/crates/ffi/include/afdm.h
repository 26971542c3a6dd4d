#ifndef AFDM_H
#define AFDM_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of the C API.
typedef enum AfdmStatus {
  AFDM_STATUS_OK = 0,
  // A required pointer argument was null.
  AFDM_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  AFDM_STATUS_INVALID_UTF8 = 2,
  // The experiment description was rejected.
  AFDM_STATUS_INVALID_CONFIG = 3,
  AFDM_STATUS_IO = 4,
  // A matrix factorization met a vanishing pivot.
  AFDM_STATUS_SINGULAR = 5,
  // Too many frames of one detector failed.
  AFDM_STATUS_FAILURE_THRESHOLD = 6,
  AFDM_STATUS_OUT_OF_RANGE = 7,
  // The library panicked; the handle arguments remain valid.
  AFDM_STATUS_INTERNAL = 8,
} AfdmStatus;

// Validated experiment description.
typedef struct AfdmExperiment AfdmExperiment;

// Points produced by one sweep, in detector-major order.
typedef struct AfdmSweep AfdmSweep;

// Numeric fields of one BER point.
typedef struct AfdmPoint {
  double snr_db;
  uint64_t frames;
  uint64_t bits;
  uint64_t bit_errors;
  double ber;
  double mean_iters;
  uint64_t mult_count;
  uint64_t failed_frames;
} AfdmPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *afdm_version(void);

// Message of the last failed call on this thread, or null if none.
// The pointer stays valid until the next failing call on this thread.
const char *afdm_last_error(void);

// Parses a TOML experiment description.
//
// # Safety
// `toml` is a NUL-terminated string and `out` points to writable storage.
enum AfdmStatus afdm_experiment_parse(const char *toml, struct AfdmExperiment **out);

// Loads a TOML experiment description from a file.
//
// # Safety
// `path` is a NUL-terminated string and `out` points to writable storage.
enum AfdmStatus afdm_experiment_load(const char *path, struct AfdmExperiment **out);

// Number of configured detectors, 0 for a null handle.
//
// # Safety
// `exp` is null or a live handle.
size_t afdm_experiment_num_detectors(const struct AfdmExperiment *exp);

// Number of SNR grid points, 0 for a null handle.
//
// # Safety
// `exp` is null or a live handle.
size_t afdm_experiment_num_snr(const struct AfdmExperiment *exp);

// Releases an experiment; null is ignored.
//
// # Safety
// `exp` is null or a handle not yet freed.
void afdm_experiment_free(struct AfdmExperiment *exp);

// Runs the Monte-Carlo sweep. Results are deterministic in the seed.
//
// # Safety
// `exp` is a live handle and `out` points to writable storage.
enum AfdmStatus afdm_sweep_run(const struct AfdmExperiment *exp, struct AfdmSweep **out);

// Number of points, 0 for a null handle.
//
// # Safety
// `sweep` is null or a live handle.
size_t afdm_sweep_len(const struct AfdmSweep *sweep);

// Copies the numeric fields of point `index`.
//
// # Safety
// `sweep` is a live handle and `out` points to writable storage.
enum AfdmStatus afdm_sweep_point(const struct AfdmSweep *sweep,
                                 size_t index,
                                 struct AfdmPoint *out);

// Detector id of point `index`, owned by the sweep; null if out of range.
//
// # Safety
// `sweep` is null or a live handle.
const char *afdm_sweep_detector(const struct AfdmSweep *sweep, size_t index);

// Writes the sweep as CSV to `path`.
//
// # Safety
// `sweep` is a live handle and `path` a NUL-terminated string.
enum AfdmStatus afdm_sweep_write_csv(const struct AfdmSweep *sweep, const char *path);

// Releases a sweep; null is ignored.
//
// # Safety
// `sweep` is null or a handle not yet freed.
void afdm_sweep_free(struct AfdmSweep *sweep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFDM_H */
