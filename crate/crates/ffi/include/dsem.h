#ifndef DSEM_H
#define DSEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum DsemStatus {
  DSEM_STATUS_OK = 0,
  DSEM_STATUS_NULL_POINTER = 1,
  DSEM_STATUS_INVALID_INPUT = 2,
  DSEM_STATUS_BUDGET = 3,
  DSEM_STATUS_NOT_REPRESENTABLE = 4,
  DSEM_STATUS_INTERNAL = 5,
} DsemStatus;

/**
 * SIP parameters.
 */
typedef struct DsemParams DsemParams;

/**
 * A generalised PLP bundle.
 */
typedef struct DsemPlp DsemPlp;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success. Valid until the
 * next call on the same thread.
 */
const char *dsem_last_error(void);

/**
 * # Safety
 * `s` must come from this library, or be null.
 */
void dsem_string_free(char *s);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum DsemStatus dsem_params_from_json(const char *json, struct DsemParams **out);

/**
 * # Safety
 * `p` must come from `dsem_params_from_json`, or be null.
 */
void dsem_params_free(struct DsemParams *p);

/**
 * Probability of `world` (e.g. `"P(0) E(0,1)"`) at domain size `n`, as `"p/q"`.
 *
 * # Safety
 * Pointers must be valid; `out` receives a string to release with `dsem_string_free`.
 */
enum DsemStatus dsem_sip_prob(const struct DsemParams *params,
                              const char *world,
                              size_t n,
                              char **out);

/**
 * Compiles parameters into a PLP. Essentially asymmetric parameters give
 * `DSEM_STATUS_NOT_REPRESENTABLE` with the witness in `dsem_last_error`.
 *
 * # Safety
 * `params` must be a live handle; `out` must be writable.
 */
enum DsemStatus dsem_synthesize(const struct DsemParams *params, struct DsemPlp **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum DsemStatus dsem_plp_from_json(const char *json, struct DsemPlp **out);

/**
 * # Safety
 * `plp` must be a live handle; `out` receives a string to release with `dsem_string_free`.
 */
enum DsemStatus dsem_plp_to_json(const struct DsemPlp *plp, char **out);

/**
 * # Safety
 * `p` must come from this library, or be null.
 */
void dsem_plp_free(struct DsemPlp *p);

/**
 * Sets `*passed` to 1 when the rule expansion commutes with restrictions up to `max_n`
 * and the reduct family is projective, else 0.
 *
 * # Safety
 * `plp` must be a live handle; `passed` must be writable.
 */
enum DsemStatus dsem_check_square(const struct DsemPlp *plp,
                                  size_t max_n,
                                  uint32_t budget_atoms,
                                  int *passed);

/**
 * Compares the PLP's marginal at size `n` with the parameters' distribution.
 *
 * # Safety
 * Handles must be live; `passed` must be writable.
 */
enum DsemStatus dsem_verify_global(const struct DsemPlp *plp,
                                   const struct DsemParams *params,
                                   size_t n,
                                   uint32_t budget_atoms,
                                   int *passed);

/**
 * Synthesizes from `params` and runs the stage-by-stage verification.
 *
 * # Safety
 * `params` must be a live handle; `passed` must be writable.
 */
enum DsemStatus dsem_verify_local(const struct DsemParams *params, int *passed);

/**
 * Default enumeration budget, in ground atoms.
 */
uint32_t dsem_default_budget(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSEM_H */
