#ifndef JCAM_H
#define JCAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum JcamStatus {
  JCAM_STATUS_OK = 0,
  JCAM_STATUS_NULL_POINTER = 1,
  JCAM_STATUS_INVALID_ARGUMENT = 2,
  JCAM_STATUS_INVALID_CONFIG = 3,
  JCAM_STATUS_PARSE = 4,
  JCAM_STATUS_DOMAIN = 5,
  JCAM_STATUS_TOO_LARGE = 6,
  JCAM_STATUS_IO = 7,
  // The call panicked; the handles it touched should be freed and not
  // reused.
  JCAM_STATUS_PANIC = 8,
} JcamStatus;

typedef enum JcamStrategy {
  JCAM_STRATEGY_GREEDY = 0,
  JCAM_STRATEGY_RANDOM = 1,
  JCAM_STRATEGY_BRUTE_FORCE = 2,
  JCAM_STRATEGY_COLOCATED = 3,
} JcamStrategy;

// System parameters.
typedef struct JcamConfig JcamConfig;

// One network drop: node placement and large-scale fading.
typedef struct JcamDrop JcamDrop;

// Outcome of one assignment strategy on one drop.
typedef struct JcamResult JcamResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len - 1` bytes) and returns the full message
// length in bytes, excluding the terminator. `buf` may be null to query
// the length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t jcam_last_error_message(char *buf, uintptr_t len);

// Default parameters for `m` APs with `n` antennas, `k` users and `u`
// untrusted pairs.
//
// # Safety
// `out` must be a valid pointer.
enum JcamStatus jcam_config_new(uintptr_t m,
                                uintptr_t n,
                                uintptr_t k,
                                uintptr_t u,
                                struct JcamConfig **out);

// Parses `key = value` text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` a valid pointer.
enum JcamStatus jcam_config_parse(const char *text, struct JcamConfig **out);

// # Safety
// `config` must be a live handle.
enum JcamStatus jcam_config_set_seed(struct JcamConfig *config, uint64_t seed);

// Minimum downlink SE (bits/s/Hz) the assignment strategies must keep.
//
// # Safety
// `config` must be a live handle.
enum JcamStatus jcam_config_set_qos(struct JcamConfig *config, double qos_se);

// # Safety
// `config` must be null or a handle not yet freed.
void jcam_config_free(struct JcamConfig *config);

// Places nodes and draws large-scale fading for drop `seed`.
//
// # Safety
// `config` must be a live handle; `out` a valid pointer.
enum JcamStatus jcam_drop_new(const struct JcamConfig *config,
                              uint64_t seed,
                              struct JcamDrop **out);

// Large-scale gain from AP `m` to user `k`.
//
// # Safety
// `drop` must be a live handle; `out` a valid pointer.
enum JcamStatus jcam_drop_beta_dl(const struct JcamDrop *drop,
                                  uintptr_t m,
                                  uintptr_t k,
                                  double *out);

// # Safety
// `drop` must be null or a handle not yet freed.
void jcam_drop_free(struct JcamDrop *drop);

// Runs an assignment strategy on `drop` under the drop's config. The
// random and co-located strategies use the drop seed.
//
// # Safety
// `drop` must be a live handle; `out` a valid pointer.
enum JcamStatus jcam_assign(const struct JcamDrop *drop,
                            enum JcamStrategy strategy,
                            struct JcamResult **out);

// Minimum downlink SE and minimum MSP of the assignment.
//
// # Safety
// `result` must be a live handle; the out pointers valid.
enum JcamStatus jcam_result_objectives(const struct JcamResult *result,
                                       double *min_se,
                                       double *min_msp);

// Accepted moves, scored candidates and whether the QoS floor holds.
//
// # Safety
// `result` must be a live handle; the out pointers valid.
enum JcamStatus jcam_result_counters(const struct JcamResult *result,
                                     uintptr_t *iterations,
                                     uintptr_t *candidate_evaluations,
                                     bool *feasible);

// Writes the mode indicators (1 downlink, 0 monitoring) into `modes`,
// which holds `len` entries, and the AP count into `num_aps`. With
// `len` smaller than the AP count nothing is written to `modes` and the
// status is `InvalidArgument`.
//
// # Safety
// `result` must be a live handle; `modes` null or `len` writable bytes.
enum JcamStatus jcam_result_modes(const struct JcamResult *result,
                                  uint8_t *modes,
                                  uintptr_t len,
                                  uintptr_t *num_aps);

// # Safety
// `result` must be null or a handle not yet freed.
void jcam_result_free(struct JcamResult *result);

// Closed-form vs Monte Carlo check on the config's first drop. `passed`
// is false if any mandatory term misses `tol`; `failed_terms` counts all
// terms outside `tol`, report-only ones included.
//
// # Safety
// `config` must be a live handle; the out pointers valid.
enum JcamStatus jcam_verify(const struct JcamConfig *config,
                            uintptr_t trials,
                            double tol,
                            bool *passed,
                            uintptr_t *failed_terms);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JCAM_H */
