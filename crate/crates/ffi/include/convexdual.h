/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef CONVEXDUAL_H
#define CONVEXDUAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CdStatus {
  CD_STATUS_OK = 0,
  // A required pointer was null.
  CD_STATUS_NULL_POINTER = 1,
  // Bad argument value, dimension or string encoding.
  CD_STATUS_INVALID_ARGUMENT = 2,
  // Malformed JSON.
  CD_STATUS_PARSE = 3,
  // Well-formed JSON that does not match the instance schema.
  CD_STATUS_SCHEMA_MISMATCH = 4,
  CD_STATUS_IO = 5,
  // The instance kind has no lossless change of variables.
  CD_STATUS_NO_LOSSLESS_MAP = 6,
  CD_STATUS_NOT_STABILIZABLE = 7,
  // Solver or numerical breakdown.
  CD_STATUS_NUMERICAL = 8,
  // Defect or caught panic.
  CD_STATUS_INTERNAL = 9,
} CdStatus;

typedef enum CdVerdict {
  CD_VERDICT_STRONG_DUALITY_VERIFIED = 0,
  CD_VERDICT_WEAK_ONLY = 1,
  CD_VERDICT_INCONCLUSIVE = 2,
} CdVerdict;

typedef enum CdClock {
  CD_CLOCK_CONTINUOUS_TIME = 0,
  CD_CLOCK_DISCRETE_TIME = 1,
} CdClock;

// A strong-duality certificate.
typedef struct CdCertificate CdCertificate;

// A loaded instance file.
typedef struct CdInstance CdInstance;

// A synthesized stabilizing state feedback.
typedef struct CdStabilization CdStabilization;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL if none.
//
// The pointer stays valid until the next failing call on the same thread.
const char *cd_last_error(void);

// Library version as a static NUL-terminated string.
const char *cd_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void cd_string_free(char *s);

// Loads a built-in corpus instance by name.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum CdStatus cd_instance_builtin(const char *name, struct CdInstance **out);

// Loads an instance file from disk.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CdStatus cd_instance_load(const char *path, struct CdInstance **out);

// Parses an instance from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum CdStatus cd_instance_from_json(const char *json, struct CdInstance **out);

// Canonical JSON text of an instance. Free with [`cd_string_free`].
//
// # Safety
// `inst` must be a live handle; `out` must be writable.
enum CdStatus cd_instance_to_json(const struct CdInstance *inst, char **out);

// # Safety
// `inst` must come from this library and not be freed twice. NULL is ignored.
void cd_instance_free(struct CdInstance *inst);

// Solves the convexified problem of `inst` and certifies strong duality.
//
// A certificate is produced even when the verdict is not verified; inspect it
// with [`cd_certificate_verdict`]. Fails with `NoLosslessMap` for output-feedback
// instances.
//
// # Safety
// `inst` must be a live handle; `out` must be writable.
enum CdStatus cd_certify(const struct CdInstance *inst,
                         double tol_gap,
                         double tol_feas,
                         size_t samples,
                         uint64_t seed,
                         struct CdCertificate **out);

// Default tolerances and sampling for [`cd_certify`].
//
// # Safety
// Each out-pointer must be NULL or writable.
void cd_certify_defaults(double *tol_gap, double *tol_feas, size_t *samples, uint64_t *seed);

// Primal value; NaN for a NULL handle.
//
// # Safety
// `cert` must be NULL or a live handle.
double cd_certificate_primal_value(const struct CdCertificate *cert);

// Dual value; NaN for a NULL handle.
//
// # Safety
// `cert` must be NULL or a live handle.
double cd_certificate_dual_value(const struct CdCertificate *cert);

// Duality gap; NaN for a NULL handle.
//
// # Safety
// `cert` must be NULL or a live handle.
double cd_certificate_gap(const struct CdCertificate *cert);

// Strict-feasibility margin; NaN for a NULL handle.
//
// # Safety
// `cert` must be NULL or a live handle.
double cd_certificate_slater_margin(const struct CdCertificate *cert);

// Verdict; `Inconclusive` for a NULL handle.
//
// # Safety
// `cert` must be NULL or a live handle.
enum CdVerdict cd_certificate_verdict(const struct CdCertificate *cert);

// Canonical JSON of the certificate, byte-identical to the CLI's `--format json`
// output of `certify`. Free with [`cd_string_free`].
//
// # Safety
// `cert` must be a live handle; `out` must be writable.
enum CdStatus cd_certificate_to_json(const struct CdCertificate *cert, char **out);

// # Safety
// `cert` must come from this library and not be freed twice. NULL is ignored.
void cd_certificate_free(struct CdCertificate *cert);

// Synthesizes a stabilizing state feedback `u = F x` for `(A, B)`.
//
// `a` is `n×n` and `b` is `n×m`, both row-major. `clock` is a [`CdClock`]
// value; anything else is rejected. A non-positive `epsilon`
// selects the default margin. Fails with `NotStabilizable` when no
// certificate is found.
//
// # Safety
// `a` must hold `n*n` doubles, `b` must hold `n*m` doubles; `out` must be writable.
enum CdStatus cd_synthesize(const double *a,
                            const double *b,
                            size_t n,
                            size_t m,
                            uint32_t clock,
                            double epsilon,
                            struct CdStabilization **out);

// Synthesizes a feedback for a stabilization instance (`ct_stabilization` or
// `dt_stabilization`), honoring its stored `epsilon`.
//
// # Safety
// `inst` must be a live handle; `out` must be writable.
enum CdStatus cd_instance_synthesize(const struct CdInstance *inst, struct CdStabilization **out);

// Number of inputs `m` (rows of `F`); 0 for a NULL handle.
//
// # Safety
// `res` must be NULL or a live handle.
size_t cd_stabilization_inputs(const struct CdStabilization *res);

// Number of states `n` (columns of `F`); 0 for a NULL handle.
//
// # Safety
// `res` must be NULL or a live handle.
size_t cd_stabilization_states(const struct CdStabilization *res);

// Copies the `m×n` gain `F` row-major into `out`, which holds `len` doubles.
//
// # Safety
// `res` must be a live handle; `out` must hold `len` doubles.
enum CdStatus cd_stabilization_gain(const struct CdStabilization *res, double *out, size_t len);

// Copies the `n×n` Lyapunov matrix `P` row-major into `out`, which holds `len` doubles.
//
// # Safety
// `res` must be a live handle; `out` must hold `len` doubles.
enum CdStatus cd_stabilization_lyapunov(const struct CdStabilization *res, double *out, size_t len);

// `max Re λ(A + BF)` in continuous time, `max |λ(A + BF)|` in discrete time;
// NaN for a NULL handle.
//
// # Safety
// `res` must be NULL or a live handle.
double cd_stabilization_measure(const struct CdStabilization *res);

// The `ε` at which the certificate was found; NaN for a NULL handle.
//
// # Safety
// `res` must be NULL or a live handle.
double cd_stabilization_epsilon(const struct CdStabilization *res);

// Copies the strong-duality certificate of the underlying margin program.
//
// # Safety
// `res` must be a live handle; `out` must be writable.
enum CdStatus cd_stabilization_certificate(const struct CdStabilization *res,
                                           struct CdCertificate **out);

// # Safety
// `res` must come from this library and not be freed twice. NULL is ignored.
void cd_stabilization_free(struct CdStabilization *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONVEXDUAL_H */
