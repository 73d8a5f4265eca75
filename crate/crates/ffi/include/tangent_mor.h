#ifndef TANGENT_MOR_H
#define TANGENT_MOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TmStatus {
  TM_STATUS_OK = 0,
  TM_STATUS_NULL_POINTER = 1,
  TM_STATUS_INVALID_ARGUMENT = 2,
  TM_STATUS_DIMENSION_MISMATCH = 3,
  TM_STATUS_SINGULAR_SHIFT = 4,
  TM_STATUS_BREAKDOWN = 5,
  TM_STATUS_DEFLATION = 6,
  /**
   * other failures of the numerics
   */
  TM_STATUS_NUMERICAL = 7,
  TM_STATUS_IO = 8,
  TM_STATUS_PARSE = 9,
  TM_STATUS_UNSUPPORTED = 10,
  TM_STATUS_PANIC = 11,
} TmStatus;

/**
 * Reduced model together with the shifts, directions and history that
 * produced it.
 */
typedef struct TmReducedModel TmReducedModel;

/**
 * Sparse first-order system `(A, B, C)`.
 */
typedef struct TmSystem TmSystem;

typedef struct TmComplex {
  double re;
  double im;
} TmComplex;

/**
 * One row of the reduction history.
 */
typedef struct TmIterationRecord {
  size_t iteration;
  struct TmComplex sigma;
  struct TmComplex mu;
  double right_residual;
  double left_residual;
  size_t candidates;
  double biorthogonality;
} TmIterationRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next `tm_*` call on the same thread.
 */
const char *tm_last_error(void);

/**
 * Convection-diffusion benchmark with `n0 * n0` unknowns and seeded
 * uniform `B` (n×p), `C` (p×n).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum TmStatus tm_system_generate_fdm(size_t n0, size_t p, uint64_t seed, struct TmSystem **out);

/**
 * System from column-major dense arrays: `a` n×n, `b` n×p, `c` p×n. Zero
 * entries of `a` are not stored.
 *
 * # Safety
 * The arrays must hold `n*n`, `n*p` and `p*n` doubles; `out` must be valid.
 */
enum TmStatus tm_system_new_dense(size_t n,
                                  size_t p,
                                  const double *a,
                                  const double *b,
                                  const double *c,
                                  struct TmSystem **out);

/**
 * Reads `A` (and optionally `B`, `C`) from Matrix Market files. NULL `b`
 * or `c` are replaced by seeded random matrices with `p` ports.
 *
 * # Safety
 * Paths must be NUL-terminated strings or NULL; `out` must be valid.
 */
enum TmStatus tm_system_load(const char *a,
                             const char *b,
                             const char *c,
                             size_t p,
                             uint64_t seed,
                             struct TmSystem **out);

/**
 * # Safety
 * `sys` must be NULL or a handle from this library not yet freed.
 */
void tm_system_free(struct TmSystem *sys);

/**
 * State dimension, or 0 for a NULL handle.
 *
 * # Safety
 * `sys` must be NULL or a live handle.
 */
size_t tm_system_order(const struct TmSystem *sys);

/**
 * Number of inputs (= outputs), or 0 for a NULL handle.
 *
 * # Safety
 * `sys` must be NULL or a live handle.
 */
size_t tm_system_ports(const struct TmSystem *sys);

/**
 * `C (omega I - A)^{-1} B` written column-major into `out` (p*p entries).
 *
 * # Safety
 * `sys` must be live and `out` must hold `p*p` values.
 */
enum TmStatus tm_system_transfer(const struct TmSystem *sys,
                                 struct TmComplex omega,
                                 struct TmComplex *out);

/**
 * Adaptive reduction with block width `s`, at most `m_max` blocks and
 * relative residual tolerance `tol` (pass 0 or a negative value for the
 * default).
 *
 * # Safety
 * `sys` must be live and `out` valid.
 */
enum TmStatus tm_reduce(const struct TmSystem *sys,
                        size_t s,
                        size_t m_max,
                        double tol,
                        struct TmReducedModel **out);

/**
 * # Safety
 * `model` must be NULL or a live handle.
 */
void tm_model_free(struct TmReducedModel *model);

/**
 * Reduced order `m * s`, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t tm_model_order(const struct TmReducedModel *model);

/**
 * Number of history records, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t tm_model_history_len(const struct TmReducedModel *model);

/**
 * 1 if the residual tolerance was met, 0 otherwise.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
int32_t tm_model_converged(const struct TmReducedModel *model);

/**
 * # Safety
 * `model` must be live and `out` valid.
 */
enum TmStatus tm_model_history(const struct TmReducedModel *model,
                               size_t index,
                               struct TmIterationRecord *out);

/**
 * Reduced transfer function at `omega`, column-major p×p.
 *
 * # Safety
 * `model` must be live and `out` must hold `p*p` values.
 */
enum TmStatus tm_model_transfer(const struct TmReducedModel *model,
                                struct TmComplex omega,
                                struct TmComplex *out);

/**
 * Writes the model as Matrix Market files plus `metadata.json` into `dir`.
 *
 * # Safety
 * `model` must be live and `dir` a NUL-terminated path.
 */
enum TmStatus tm_model_save(const struct TmReducedModel *model, const char *dir);

/**
 * Largest `||H(jw) - H_m(jw)||_2` over `count` log-spaced `w` in
 * `[omega_min, omega_max]`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum TmStatus tm_sampled_hinf_error(const struct TmSystem *sys,
                                    const struct TmReducedModel *model,
                                    double omega_min,
                                    double omega_max,
                                    size_t count,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TANGENT_MOR_H */
