#ifndef SL_SOLV_H
#define SL_SOLV_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_PARSE = 3,
  SL_STATUS_NUMERICAL = 4,
  SL_STATUS_OUTSIDE_DOMAIN = 5,
  SL_STATUS_UTF8 = 6,
  SL_STATUS_PANIC = 7,
} SlStatus;

typedef enum SlVerdict {
  SL_VERDICT_CORRECTLY_SOLVABLE = 0,
  SL_VERDICT_NOT_CORRECTLY_SOLVABLE = 1,
  SL_VERDICT_INCONCLUSIVE = 2,
} SlVerdict;

// A coefficient pair `(r, q)`.
typedef struct SlPair SlPair;

// A principal fundamental system `{u, v}`.
typedef struct SlPfss SlPfss;

// The outcome of a solvability analysis.
typedef struct SlReport SlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// `r = (1 + x²)^alpha`, `q = (1 + x²)^(-beta)`.
//
// # Safety
// `out` must be valid for writes.
enum SlStatus sl_pair_power_law(double alpha, double beta, struct SlPair **out);

// `r ≡ r0`, `q ≡ q0`.
//
// # Safety
// `out` must be valid for writes.
enum SlStatus sl_pair_constant(double r0, double q0, struct SlPair **out);

// Builds a pair from a JSON problem description.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid for writes.
enum SlStatus sl_pair_from_json(const char *json, struct SlPair **out);

// # Safety
// `pair` must come from an `sl_pair_*` constructor and not be used again.
void sl_pair_free(struct SlPair *pair);

// Constructs the principal system of `pair`.
//
// # Safety
// `pair` must be a live handle and `out` valid for writes.
enum SlStatus sl_pfss_construct(const struct SlPair *pair, struct SlPfss **out);

// Writes `u(x)`, `v(x)` and `ρ(x)`. Any output pointer may be null.
//
// # Safety
// `pfss` must be a live handle; non-null outputs must be valid for writes.
enum SlStatus sl_pfss_eval(const struct SlPfss *pfss, double x, double *u, double *v, double *rho);

// The width `s(x)`.
//
// # Safety
// `pfss` must be a live handle and `out` valid for writes.
enum SlStatus sl_width_s(const struct SlPfss *pfss, double x, double *out);

// The Green function `G(x, t)`.
//
// # Safety
// `pfss` must be a live handle and `out` valid for writes.
enum SlStatus sl_green_eval(const struct SlPfss *pfss, double x, double t, double *out);

// # Safety
// `pfss` must come from [`sl_pfss_construct`] and not be used again.
void sl_pfss_free(struct SlPfss *pfss);

// Decides correct solvability in `L_p`.
//
// # Safety
// `pair` must be a live handle and `out` valid for writes.
enum SlStatus sl_analyze(const struct SlPair *pair, double p, struct SlReport **out);

// # Safety
// `report` must be a live handle and `out` valid for writes.
enum SlStatus sl_report_verdict(const struct SlReport *report, enum SlVerdict *out);

// The report as JSON with sorted keys. Release with [`sl_string_free`].
//
// # Safety
// `report` must be a live handle and `out` valid for writes.
enum SlStatus sl_report_to_json(const struct SlReport *report, char **out);

// # Safety
// `report` must come from [`sl_analyze`] and not be used again.
void sl_report_free(struct SlReport *report);

// # Safety
// `s` must come from this library and not be used again.
void sl_string_free(char *s);

// The message of the last failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *sl_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SL_SOLV_H */
