#ifndef SUMMON_H
#define SUMMON_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum SummonStatus {
  SUMMON_STATUS_OK = 0,
  SUMMON_STATUS_NULL_POINTER = 1,
  SUMMON_STATUS_INVALID_UTF8 = 2,
  SUMMON_STATUS_PARSE_ERROR = 3,
  SUMMON_STATUS_INVALID_TASK = 4,
  /**
   * The task cannot be solved with a classical token.
   */
  SUMMON_STATUS_IMPOSSIBLE = 5,
  /**
   * No quantum protocol was synthesized; the output lists the reasons.
   */
  SUMMON_STATUS_REFUSED = 6,
  SUMMON_STATUS_INTERNAL = 7,
} SummonStatus;

/**
 * Opaque synthesized protocol plan.
 */
typedef struct SummonPlan SummonPlan;

/**
 * Opaque validated task.
 */
typedef struct SummonTask SummonTask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *summon_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call on the same thread.
 */
const char *summon_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void summon_string_free(char *s);

/**
 * Parses and validates a task document. On `INVALID_TASK` the violations
 * are written to `report` as JSON when it is non-null.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 * `report` may be null.
 */
enum SummonStatus summon_task_from_json(const char *json, struct SummonTask **out, char **report);

/**
 * # Safety
 * `task` must come from [`summon_task_from_json`] and not have been freed.
 */
void summon_task_free(struct SummonTask *task);

/**
 * Decides classical possibility and writes the verdict as JSON. Returns
 * `OK` when possible and `IMPOSSIBLE` otherwise; both fill `verdict`.
 *
 * # Safety
 * `task` must be a live handle and `verdict` a valid pointer.
 */
enum SummonStatus summon_task_check(const struct SummonTask *task, char **verdict);

/**
 * Synthesizes a protocol with secrets of dimension `secret_dim`. On
 * `REFUSED` the reasons are written to `refusal` as JSON when non-null.
 *
 * # Safety
 * `task` must be a live handle and `out` a valid pointer. `refusal` may be
 * null.
 */
enum SummonStatus summon_synthesize(const struct SummonTask *task,
                                    uint32_t secret_dim,
                                    struct SummonPlan **out,
                                    char **refusal);

/**
 * # Safety
 * `plan` must come from [`summon_synthesize`] and not have been freed.
 */
void summon_plan_free(struct SummonPlan *plan);

/**
 * Writes the plan as JSON.
 *
 * # Safety
 * `plan` must be a live handle and `json` a valid pointer.
 */
enum SummonStatus summon_plan_to_json(const struct SummonPlan *plan, char **json);

/**
 * Runs the plan for one assignment of `len` input values and writes the
 * outcome as JSON.
 *
 * # Safety
 * `plan` must be a live handle, `values` must point to `len` integers (or
 * be null with `len == 0`) and `outcome` must be a valid pointer.
 */
enum SummonStatus summon_run(const struct SummonPlan *plan,
                             const uint32_t *values,
                             size_t len,
                             uint64_t seed,
                             char **outcome);

/**
 * Runs every allowed assignment and writes the report as JSON. `jobs` of
 * zero uses the default thread pool.
 *
 * # Safety
 * Both handles must be live, `plan` synthesized from `task`, and `report`
 * a valid pointer.
 */
enum SummonStatus summon_run_exhaustive(const struct SummonTask *task,
                                        const struct SummonPlan *plan,
                                        uint64_t seed,
                                        size_t jobs,
                                        char **report);

/**
 * Whether a causal curve can run from `a` to `b`. Each point is `dim + 1`
 * doubles, time first.
 *
 * # Safety
 * `a` and `b` must each point to `dim + 1` doubles and `out` must be valid.
 */
enum SummonStatus summon_causally_precedes(const double *a, const double *b, size_t dim, bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUMMON_H */
