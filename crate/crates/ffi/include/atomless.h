#ifndef ATOMLESS_H
#define ATOMLESS_H

#pragma once

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The nonzero library codes match the command-line exit codes.
 */
typedef enum AtomlessStatus {
  ATOMLESS_STATUS_OK = 0,
  /**
   * Invalid model, policy, schema or argument domain.
   */
  ATOMLESS_STATUS_VALIDATION = 2,
  /**
   * Not certified, tolerance not reached, infeasible or undecidable target.
   */
  ATOMLESS_STATUS_CERTIFIED_FAILURE = 3,
  ATOMLESS_STATUS_IO = 4,
  ATOMLESS_STATUS_NULL_POINTER = 5,
  /**
   * Bad UTF-8, short output buffer or wrong policy kind.
   */
  ATOMLESS_STATUS_INVALID_ARGUMENT = 6,
  ATOMLESS_STATUS_PANIC = 7,
} AtomlessStatus;

/**
 * Opaque model handle.
 */
typedef struct AtomlessModel AtomlessModel;

/**
 * Opaque policy handle, deterministic or stationary.
 */
typedef struct AtomlessPolicy AtomlessPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *atomless_last_error(void);

/**
 * Parses a TOML model document.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AtomlessStatus atomless_model_from_toml(const char *toml, struct AtomlessModel **out);

/**
 * Reads a TOML model document from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AtomlessStatus atomless_model_load(const char *path, struct AtomlessModel **out);

/**
 * Builds a named builtin model. `cells` sizes grid-based builtins, `seed`
 * drives `random`, `beta` is the discount of `one-cell-discounted`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AtomlessStatus atomless_model_builtin(const char *name,
                                           size_t cells,
                                           uint64_t seed,
                                           double beta,
                                           struct AtomlessModel **out);

/**
 * # Safety
 * `m` must come from this library and not be used afterwards; null is ignored.
 */
void atomless_model_free(struct AtomlessModel *m);

/**
 * Number of reward criteria; 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live model handle.
 */
size_t atomless_model_criteria(const struct AtomlessModel *m);

/**
 * Number of actions; 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live model handle.
 */
size_t atomless_model_actions(const struct AtomlessModel *m);

/**
 * Certified bound `L` on the expected absorption time.
 *
 * # Safety
 * `m` must be a live model handle and `out` a valid pointer.
 */
enum AtomlessStatus atomless_model_certificate(const struct AtomlessModel *m, double *out);

/**
 * Parses a policy in the row format (`lo hi action` or `lo hi p_0 .. p_k`)
 * and checks it against the model.
 *
 * # Safety
 * `m` must be a live model handle, `rows` a NUL-terminated string and `out`
 * a valid pointer.
 */
enum AtomlessStatus atomless_policy_parse(const struct AtomlessModel *m,
                                          const char *rows,
                                          struct AtomlessPolicy **out);

/**
 * # Safety
 * `p` must come from this library and not be used afterwards; null is ignored.
 */
void atomless_policy_free(struct AtomlessPolicy *p);

/**
 * 1 for a deterministic policy, 0 for a stationary one or null.
 *
 * # Safety
 * `p` must be null or a live policy handle.
 */
int32_t atomless_policy_is_deterministic(const struct AtomlessPolicy *p);

/**
 * Row-format text of a policy; release with [`atomless_string_free`].
 * Returns null for a null handle.
 *
 * # Safety
 * `p` must be null or a live policy handle.
 */
char *atomless_policy_to_string(const struct AtomlessPolicy *p);

/**
 * # Safety
 * `s` must come from [`atomless_policy_to_string`]; null is ignored.
 */
void atomless_string_free(char *s);

/**
 * Writes the performance vector of `p` to `out[0..criteria]`.
 *
 * # Safety
 * `m` and `p` must be live handles and `out` must hold `len` doubles.
 */
enum AtomlessStatus atomless_evaluate(const struct AtomlessModel *m,
                                      const struct AtomlessPolicy *p,
                                      double tol,
                                      double *out,
                                      size_t len);

/**
 * Deterministic policy whose performance is within `tol` of that of `p`.
 *
 * # Safety
 * `m` and `p` must be live handles and `out` a valid pointer.
 */
enum AtomlessStatus atomless_derandomize(const struct AtomlessModel *m,
                                         const struct AtomlessPolicy *p,
                                         double tol,
                                         struct AtomlessPolicy **out);

/**
 * Deterministic policy realizing `lambda v(p0) + (1 - lambda) v(p1)` within
 * `tol`. Both inputs must be deterministic.
 *
 * # Safety
 * `m`, `p0` and `p1` must be live handles and `out` a valid pointer.
 */
enum AtomlessStatus atomless_mix(const struct AtomlessModel *m,
                                 const struct AtomlessPolicy *p0,
                                 const struct AtomlessPolicy *p1,
                                 double lambda,
                                 double tol,
                                 struct AtomlessPolicy **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATOMLESS_H */
