#ifndef SLOTQED_H
#define SLOTQED_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum SlotqedStatus {
  SLOTQED_STATUS_OK = 0,
  SLOTQED_STATUS_NULL_POINTER = 1,
  SLOTQED_STATUS_INVALID_UTF8 = 2,
  SLOTQED_STATUS_CONFIG = 3,
  SLOTQED_STATUS_DOMAIN = 4,
  SLOTQED_STATUS_NUMERICAL = 5,
  SLOTQED_STATUS_IO = 6,
  SLOTQED_STATUS_OUT_OF_RANGE = 7,
  SLOTQED_STATUS_BUFFER_TOO_SMALL = 8,
  SLOTQED_STATUS_PANIC = 9,
};

/**
 * Sweep results of one run.
 */
struct SlotqedResult;

/**
 * A parsed and validated scenario.
 */
struct SlotqedScenario;

/**
 * One sweep point. Shifts, centres and widths are in units of Γ0; fields
 * that do not apply to the sweep are NaN.
 */
struct SlotqedPoint {
  double x;
  size_t n_atoms;
  double shift;
  double shift_err;
  double center;
  double width;
  bool converged;
  bool failed;
};

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *slotqed_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *slotqed_version(void);

/**
 * Parse a scenario from TOML text. `base_dir` (nullable) resolves relative
 * mode-file paths.
 *
 * # Safety
 * `toml` and a non-null `base_dir` must be NUL-terminated strings; `out`
 * must point to writable storage for one pointer.
 */
enum SlotqedStatus slotqed_scenario_from_toml(const char *toml,
                                              const char *base_dir,
                                              struct SlotqedScenario **out);

/**
 * Load a scenario file; relative paths inside resolve against its directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SlotqedStatus slotqed_scenario_load(const char *path, struct SlotqedScenario **out);

/**
 * # Safety
 * `s` must come from a scenario constructor and not be freed twice. Null is a no-op.
 */
void slotqed_scenario_free(struct SlotqedScenario *s);

/**
 * Copy the hex config hash into `buf` (`cap` bytes including the NUL).
 *
 * # Safety
 * `s` must be a live handle and `buf` writable for `cap` bytes.
 */
enum SlotqedStatus slotqed_scenario_hash(const struct SlotqedScenario *s, char *buf, size_t cap);

/**
 * Run every sweep point in memory.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum SlotqedStatus slotqed_scenario_run(const struct SlotqedScenario *s,
                                        struct SlotqedResult **out);

/**
 * Run and write the output tables into `dir`.
 *
 * # Safety
 * `s` must be a live handle and `dir` a NUL-terminated string.
 */
enum SlotqedStatus slotqed_scenario_run_to_dir(const struct SlotqedScenario *s, const char *dir);

/**
 * # Safety
 * `r` must come from [`slotqed_scenario_run`] and not be freed twice. Null is a no-op.
 */
void slotqed_result_free(struct SlotqedResult *r);

/**
 * Number of sweep points; 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t slotqed_result_len(const struct SlotqedResult *r);

/**
 * # Safety
 * `r` must be a live handle and `out` writable.
 */
enum SlotqedStatus slotqed_result_point(const struct SlotqedResult *r,
                                        size_t i,
                                        struct SlotqedPoint *out);

/**
 * Length of spectrum `variant` (0 interacting, 1 reference) at point `i`.
 *
 * # Safety
 * `r` must be a live handle and `len` writable.
 */
enum SlotqedStatus slotqed_result_spectrum_len(const struct SlotqedResult *r,
                                               size_t i,
                                               size_t variant,
                                               size_t *len);

/**
 * Copy a spectrum: detunings (in Γ0), absorption and its standard error.
 * Each buffer must hold `cap` values; any of them may be null to skip it.
 *
 * # Safety
 * `r` must be a live handle; non-null buffers must be writable for `cap` doubles.
 */
enum SlotqedStatus slotqed_result_spectrum(const struct SlotqedResult *r,
                                           size_t i,
                                           size_t variant,
                                           double *detuning,
                                           double *absorption,
                                           double *std_err,
                                           size_t cap);

/**
 * Run the oracle checks. `passed` and `total` (both nullable) receive counts;
 * the status is `Ok` even if some checks fail.
 *
 * # Safety
 * Non-null pointers must be writable.
 */
enum SlotqedStatus slotqed_verify(size_t *passed, size_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLOTQED_H */
