#ifndef SSAGG_H
#define SSAGG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsaggMode {
  /**
   * Use the mode each acquisition declares.
   */
  SSAGG_MODE_DECLARED = 0,
  SSAGG_MODE_ON_CHAIN = 1,
  SSAGG_MODE_OFF_CHAIN = 2,
} SsaggMode;

typedef enum SsaggProvider {
  SSAGG_PROVIDER_DETERMINISTIC = 0,
  SSAGG_PROVIDER_SYSTEM = 1,
} SsaggProvider;

/**
 * Result of every call.
 */
typedef enum SsaggStatus {
  SSAGG_STATUS_OK = 0,
  SSAGG_STATUS_NULL_POINTER = 1,
  SSAGG_STATUS_INVALID_UTF8 = 2,
  /**
   * The scenario does not parse or does not validate.
   */
  SSAGG_STATUS_CONFIG = 3,
  /**
   * The simulation could not finish.
   */
  SSAGG_STATUS_RUN_FAILED = 4,
  SSAGG_STATUS_NOT_FOUND = 5,
  SSAGG_STATUS_INVALID_ARGUMENT = 6,
  SSAGG_STATUS_PANIC = 7,
} SsaggStatus;

/**
 * A finished scenario run.
 */
typedef struct SsaggResult SsaggResult;

/**
 * A parsed scenario.
 */
typedef struct SsaggScenario SsaggScenario;

/**
 * Overrides for a run. Pass a null pointer to run as declared.
 */
typedef struct SsaggRunOptions {
  enum SsaggMode mode;
  /**
   * Negative: as declared; zero: off; positive: on.
   */
  int strict;
  enum SsaggProvider provider;
  /**
   * Non-zero runs one thread per actor.
   */
  int threaded;
} SsaggRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ssagg_last_error(void);

/**
 * Library version as a static string.
 */
const char *ssagg_version(void);

/**
 * Parses a scenario from JSON text.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum SsaggStatus ssagg_scenario_from_json(const char *json, struct SsaggScenario **out);

/**
 * Loads one of the scenarios shipped with the library by name.
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` a valid pointer.
 */
enum SsaggStatus ssagg_scenario_bundled(const char *name, struct SsaggScenario **out);

/**
 * Serializes a scenario back to JSON. Free the string with `ssagg_string_free`.
 *
 * # Safety
 * `scenario` must come from this library; `out` must be a valid pointer.
 */
enum SsaggStatus ssagg_scenario_to_json(const struct SsaggScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` must come from this library or be null, and is invalid afterwards.
 */
void ssagg_scenario_free(struct SsaggScenario *scenario);

/**
 * Runs a scenario with the seed and optional overrides (`options` may be null).
 *
 * A run whose assertions fail still returns `Ok`; check
 * `ssagg_result_passed`.
 *
 * # Safety
 * `scenario` must come from this library; `options` must be null or valid;
 * `out` must be a valid pointer.
 */
enum SsaggStatus ssagg_scenario_run(const struct SsaggScenario *scenario,
                                    uint64_t seed,
                                    const struct SsaggRunOptions *options,
                                    struct SsaggResult **out);

/**
 * 1 when every assertion of the scenario held, 0 otherwise or for null.
 *
 * # Safety
 * `result` must come from this library or be null.
 */
int ssagg_result_passed(const struct SsaggResult *result);

/**
 * Number of acquisitions in the result; 0 for null.
 *
 * # Safety
 * `result` must come from this library or be null.
 */
size_t ssagg_result_run_count(const struct SsaggResult *result);

/**
 * Canonical JSON report. Free the string with `ssagg_string_free`.
 *
 * # Safety
 * `result` must come from this library; `out` must be a valid pointer.
 */
enum SsaggStatus ssagg_result_report(const struct SsaggResult *result, char **out);

/**
 * The event trace, one canonical JSON object per line.
 *
 * # Safety
 * `result` must come from this library; `out` must be a valid pointer.
 */
enum SsaggStatus ssagg_result_trace(const struct SsaggResult *result, char **out);

/**
 * Writes the 32-byte trace digest into `digest`.
 *
 * # Safety
 * `result` must come from this library; `digest` must point to 32 writable bytes.
 */
enum SsaggStatus ssagg_result_trace_digest(const struct SsaggResult *result, uint8_t *digest);

/**
 * Canonical JSON of the output envelope of acquisition `index`. Sets `*out`
 * to null when that acquisition produced no output.
 *
 * # Safety
 * `result` must come from this library; `out` must be a valid pointer.
 */
enum SsaggStatus ssagg_result_output(const struct SsaggResult *result, size_t index, char **out);

/**
 * # Safety
 * `result` must come from this library or be null, and is invalid afterwards.
 */
void ssagg_result_free(struct SsaggResult *result);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library or be null, and is invalid afterwards.
 */
void ssagg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSAGG_H */
