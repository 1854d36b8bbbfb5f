/* C interface of the WBAN/IoT coexistence simulator. */

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum CsimStatus {
  CsimStatus_Ok = 0,
  CsimStatus_NullArgument = 1,
  CsimStatus_InvalidUtf8 = 2,
  CsimStatus_InvalidConfig = 3,
  CsimStatus_Io = 4,
  CsimStatus_Internal = 5,
} CsimStatus;

/**
 * Opaque scenario handle.
 */
typedef struct CsimScenario CsimScenario;

/**
 * Library version as a static string; do not free.
 */
const char *csim_version(void);

/**
 * New scenario with default parameters. Free with `csim_scenario_free`.
 */
struct CsimScenario *csim_scenario_default(void);

/**
 * Parse a scenario from TOML text. Returns null on error; when `error_out`
 * is non-null it receives a message (free with `csim_string_free`).
 *
 * # Safety
 * `toml_text` must point to a NUL-terminated string; `error_out`, when
 * non-null, must point to writable storage for one pointer.
 */
struct CsimScenario *csim_scenario_from_toml(const char *toml_text, char **error_out);

/**
 * Apply one dotted-key override, e.g. `("n_wbans", "12")`.
 *
 * # Safety
 * `scenario` must be a live handle from this library; `key` and `value`
 * must be NUL-terminated strings.
 */
enum CsimStatus csim_scenario_set(struct CsimScenario *scenario,
                                  const char *key,
                                  const char *value);

/**
 * Release a scenario handle.
 *
 * # Safety
 * `scenario` must be null or a handle returned by this library, not yet
 * freed.
 */
void csim_scenario_free(struct CsimScenario *scenario);

/**
 * Simulate one scenario; on success `summary_json_out` receives the run
 * summary as a JSON document (free with `csim_string_free`).
 *
 * # Safety
 * `scenario` must be a live handle; `summary_json_out` must point to
 * writable storage for one pointer.
 */
enum CsimStatus csim_run(const struct CsimScenario *scenario, char **summary_json_out);

/**
 * Run a shipped sweep preset ("exp1".."exp5"); on success `csv_out`
 * receives the aggregated table as CSV text (free with `csim_string_free`).
 * `replications` overrides the preset's replication count when positive.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `csv_out` must point to writable
 * storage for one pointer.
 */
enum CsimStatus csim_sweep_preset(const char *name, int32_t replications, char **csv_out);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string pointer returned by this library, not yet
 * freed.
 */
void csim_string_free(char *s);
