#ifndef QSM_H
#define QSM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum QsmStatus {
  QSM_STATUS_OK = 0,
  QSM_STATUS_NULL_POINTER = 1,
  QSM_STATUS_INVALID_UTF8 = 2,
  QSM_STATUS_PARSE = 3,
  QSM_STATUS_VALIDATION = 4,
  QSM_STATUS_INFEASIBLE = 5,
  QSM_STATUS_WRONG_KIND = 6,
  QSM_STATUS_OUT_OF_RANGE = 7,
  QSM_STATUS_PANIC = 8,
} QsmStatus;

// A loaded scenario, either partition or box.
typedef struct QsmScenario QsmScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *qsm_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void qsm_string_free(char *s);

// Parses a partition or box scenario from JSON.
//
// # Safety
// `json` must be a nul-terminated string and `out` a writable pointer.
enum QsmStatus qsm_scenario_from_json(const char *json, struct QsmScenario **out);

// Releases a scenario. Null is ignored.
//
// # Safety
// `s` must come from [`qsm_scenario_from_json`] and not have been freed.
void qsm_scenario_free(struct QsmScenario *s);

// Number of hypotheses and, for partition scenarios, of named queries.
//
// # Safety
// `s` must be a live scenario; either out-pointer may be null.
enum QsmStatus qsm_scenario_sizes(const struct QsmScenario *s, size_t *hypotheses, size_t *queries);

// Value of a measure such as `"ENT"` or `"SPL_z=1.1"` on query `index`.
//
// # Safety
// `s` must be a live scenario, `measure_spec` a nul-terminated string and
// `out` writable.
enum QsmStatus qsm_evaluate(const struct QsmScenario *s,
                            const char *measure_spec,
                            size_t index,
                            double *out);

// Probability of answer 1 (`yes` true) or 0 for query `index`.
//
// # Safety
// `s` must be a live scenario and `out` writable.
enum QsmStatus qsm_answer_probability(const struct QsmScenario *s,
                                      size_t index,
                                      bool yes,
                                      double *out);

// Index and value of the query the measure selects among all queries.
//
// # Safety
// `s` must be a live scenario, `measure_spec` a nul-terminated string and
// both out-pointers writable.
enum QsmStatus qsm_select_best(const struct QsmScenario *s,
                               const char *measure_spec,
                               size_t *index,
                               double *value);

// Whether query `first` is DPO-preferred to query `second`.
//
// # Safety
// `s` must be a live scenario and `out` writable.
enum QsmStatus qsm_dpo_preferred(const struct QsmScenario *s,
                                 size_t first,
                                 size_t second,
                                 bool *out);

// Smallest `z` making ENT_z satisfy the DPO when all answer probabilities
// exceed `t`, for `t` in (0, 0.5).
//
// # Safety
// `out` must be writable.
enum QsmStatus qsm_ent_z_threshold(double t, double *out);

// Synthesizes a point query for a box scenario.
//
// Writes the point to `x`/`y`. When `details` is not null it receives a JSON
// object with the partition, search counters and rejected goals; release it
// with [`qsm_string_free`]. Pass `epsilon < 0` for the default tolerance.
//
// # Safety
// `s` must be a live box scenario, `measure_spec` a nul-terminated string,
// `x` and `y` writable.
enum QsmStatus qsm_synthesize_query(const struct QsmScenario *s,
                                    const char *measure_spec,
                                    double epsilon,
                                    double *x,
                                    double *y,
                                    char **details);

// Library version as a static nul-terminated string.
const char *qsm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSM_H */
