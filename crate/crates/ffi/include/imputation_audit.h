#ifndef IMPUTATION_AUDIT_H
#define IMPUTATION_AUDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result of every fallible call.
 */
typedef enum IaStatus {
  IA_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  IA_STATUS_NULL_POINTER = 1,
  /*
   A string argument was not valid UTF-8.
   */
  IA_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed input data or configuration.
   */
  IA_STATUS_DATA_ERROR = 3,
  /*
   A mathematical guard failed (empty cell, zero denominator, ...).
   */
  IA_STATUS_GUARD_ERROR = 4,
  /*
   The library panicked; this is a bug.
   */
  IA_STATUS_PANIC = 5,
} IaStatus;

/*
 Opaque finite population.
 */
typedef struct IaPopulation IaPopulation;

/*
 Opaque observation table.
 */
typedef struct IaTable IaTable;

/*
 Closed interval `[lo, hi]`.
 */
typedef struct IaInterval {
  double lo;
  double hi;
} IaInterval;

/*
 Exact probability limit of an imputation estimate against the truth.
 */
typedef struct IaBiasGap {
  double plim;
  double truth;
  double gap;
  struct IaInterval interval;
  bool truth_covered;
  bool imputation_point_in_interval;
  bool conditions_hold;
} IaBiasGap;

/*
 Pooled result of multiple imputation.
 */
typedef struct IaPooled {
  double pooled_mean;
  double pooled_dispersion;
  size_t m;
} IaPooled;

/*
 Library version as a static NUL-terminated string.
 */
const char *ia_version(void);

/*
 Message for the last failed call on this thread. The pointer stays valid
 until the next failing call on the same thread.
 */
const char *ia_last_error_message(void);

/*
 Parses a population from its JSON representation.

 # Safety
 `json` must be a valid NUL-terminated string and `out` valid for writes.
 */
enum IaStatus ia_population_from_json(const char *json, struct IaPopulation **out);

/*
 Releases a population handle. Null is ignored.

 # Safety
 `pop` must be null or a handle from `ia_population_from_json` not yet freed.
 */
void ia_population_free(struct IaPopulation *pop);

/*
 Reads a CSV file using a JSON data configuration.

 # Safety
 String arguments must be valid NUL-terminated strings and `out` valid for writes.
 */
enum IaStatus ia_table_from_csv(const char *path, const char *config_json, struct IaTable **out);

/*
 Releases a table handle. Null is ignored.

 # Safety
 `table` must be null or a handle from `ia_table_from_csv` not yet freed.
 */
void ia_table_free(struct IaTable *table);

/*
 Number of records in a table.

 # Safety
 `table` must be a live handle and `out` valid for writes.
 */
enum IaStatus ia_table_len(const struct IaTable *table, size_t *out);

/*
 Assumption-free identification interval for `E(y | x = xi)` over the
 population's outcome domain.

 # Safety
 `pop` must be a live handle, `xi` a valid string and `out` valid for writes.
 */
enum IaStatus ia_outcome_interval(const struct IaPopulation *pop,
                                  const char *xi,
                                  struct IaInterval *out);

/*
 Sample analog of the identification interval for `E(y | x = xi)`.

 # Safety
 `table` must be a live handle, `xi` a valid string and `out` valid for writes.
 */
enum IaStatus ia_sample_interval(const struct IaTable *table,
                                 const char *xi,
                                 struct IaInterval *out);

/*
 Midpoint of the sample interval for `E(y | x = xi)`.

 # Safety
 `table` must be a live handle, `xi` a valid string and `out` valid for writes.
 */
enum IaStatus ia_midpoint_estimate(const struct IaTable *table, const char *xi, double *out);

/*
 Sample bounds on `E(y | x = xi, w = omega)` for a binary outcome.

 # Safety
 `table` must be a live handle, `xi`/`omega` valid strings and `out` valid for writes.
 */
enum IaStatus ia_binary_bounds_sample(const struct IaTable *table,
                                      const char *xi,
                                      const char *omega,
                                      struct IaInterval *out);

/*
 Closed-form population bounds on `E(y | x = xi, w = omega)`.

 # Safety
 `pop` must be a live handle, `xi`/`omega` valid strings and `out` valid for writes.
 */
enum IaStatus ia_binary_bounds_population(const struct IaPopulation *pop,
                                          const char *xi,
                                          const char *omega,
                                          struct IaInterval *out);

/*
 The same bounds by exhaustive enumeration of missing-covariate allocations.

 # Safety
 `pop` must be a live handle, `xi`/`omega` valid strings and `out` valid for writes.
 */
enum IaStatus ia_binary_bounds_oracle(const struct IaPopulation *pop,
                                      const char *xi,
                                      const char *omega,
                                      struct IaInterval *out);

/*
 Bounds on `P(y = 1 | x, w = omega)` from `P(y = 1 | x)` and `P(w = omega | x)`.

 # Safety
 `out` must be valid for writes.
 */
enum IaStatus ia_duncan_davis(double p_y1, double p_w, struct IaInterval *out);

/*
 Exact bias gap of imputing under `model` (`mar`, `marcov`, `ecological`,
 `true`, `q:FILE`). `omega` null selects the missing-outcome analysis.

 # Safety
 `pop` must be a live handle, strings valid (`omega` may be null) and `out` valid for writes.
 */
enum IaStatus ia_bias_gap(const struct IaPopulation *pop,
                          const char *model,
                          const char *xi,
                          const char *omega,
                          struct IaBiasGap *out);

/*
 Multiple imputation with `m` draws under `model`; `omega` null selects
 the missing-outcome analysis.

 # Safety
 `table` must be a live handle, strings valid (`omega` may be null) and `out` valid for writes.
 */
enum IaStatus ia_multiple_imputation(const struct IaTable *table,
                                     const char *model,
                                     const char *xi,
                                     const char *omega,
                                     size_t m,
                                     uint64_t seed,
                                     struct IaPooled *out);

#endif  /* IMPUTATION_AUDIT_H */
