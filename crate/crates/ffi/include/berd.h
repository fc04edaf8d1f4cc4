#ifndef BERD_H
#define BERD_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum BerdStatus {
  BERD_STATUS_OK = 0,
  BERD_STATUS_NULL_POINTER = 1,
  BERD_STATUS_INVALID_ARGUMENT = 2,
  BERD_STATUS_PARSE = 3,
  BERD_STATUS_IO = 4,
  BERD_STATUS_INFEASIBLE = 5,
  BERD_STATUS_BUFFER_TOO_SMALL = 6,
  BERD_STATUS_INTERNAL = 7,
} BerdStatus;

/**
 * Receiver output for one frame.
 */
typedef struct BerdDecision BerdDecision;

/**
 * Received samples of one frame, one row per receiver.
 */
typedef struct BerdFrame BerdFrame;

/**
 * Rows of an SNR sweep.
 */
typedef struct BerdMetrics BerdMetrics;

/**
 * Receiver configuration: candidate grid, iteration limits and mode.
 */
typedef struct BerdReceiver BerdReceiver;

/**
 * Simulation scenario.
 */
typedef struct BerdScenario BerdScenario;

/**
 * One SNR point of a sweep.
 */
typedef struct BerdMetricRow {
  double snr_db;
  double ber;
  double pcc_mcs;
  double pcc_mod;
  double pcc_code;
  /**
   * NaN when no trial produced an estimate.
   */
  double mse_channel;
  double mse_noise;
  double mean_outer_iters;
  uint64_t trials;
} BerdMetricRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library from the same thread.
 */
const char *berd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *berd_version(void);

/**
 * Creates a scenario with the default settings.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum BerdStatus berd_scenario_new(struct BerdScenario **out);

/**
 * Parses a scenario from `key = value` text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum BerdStatus berd_scenario_parse(const char *text, struct BerdScenario **out);

/**
 * Reads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum BerdStatus berd_scenario_load(const char *path, struct BerdScenario **out);

/**
 * Sets the master seed.
 *
 * # Safety
 * `scenario` must come from this library and not be freed.
 */
enum BerdStatus berd_scenario_set_seed(struct BerdScenario *scenario, uint64_t seed);

/**
 * Sets the number of trials per SNR point.
 *
 * # Safety
 * `scenario` must come from this library and not be freed.
 */
enum BerdStatus berd_scenario_set_trials(struct BerdScenario *scenario, size_t trials);

/**
 * Sets the receiver mode: `single`, `cooperative` or `distributed`.
 *
 * # Safety
 * `scenario` must come from this library; `mode` must be NUL-terminated.
 */
enum BerdStatus berd_scenario_set_mode(struct BerdScenario *scenario, const char *mode);

/**
 * Writes the scenario as `key = value` text into `buf` (NUL included).
 * `len` receives the required size in bytes including the NUL.
 *
 * # Safety
 * `scenario` must come from this library; `buf` must hold `cap` bytes.
 */
enum BerdStatus berd_scenario_to_text(const struct BerdScenario *scenario,
                                      char *buf,
                                      size_t cap,
                                      size_t *len);

/**
 * # Safety
 * `scenario` must be NULL or come from this library, and is invalid afterwards.
 */
void berd_scenario_free(struct BerdScenario *scenario);

/**
 * Runs the blind receiver sweep of the scenario.
 *
 * # Safety
 * `scenario` must come from this library; `out` must be writable.
 */
enum BerdStatus berd_sweep(const struct BerdScenario *scenario, struct BerdMetrics **out);

/**
 * Runs one benchmark receiver (`perfect_csi`, `perfect_csi_true_theta`,
 * `zf` or `lmmse`) over the scenario's trials.
 *
 * # Safety
 * `scenario` must come from this library; `name` must be NUL-terminated;
 * `out` must be writable.
 */
enum BerdStatus berd_benchmark(const struct BerdScenario *scenario,
                               const char *name,
                               struct BerdMetrics **out);

/**
 * Number of SNR points.
 *
 * # Safety
 * `metrics` must be NULL or come from this library.
 */
size_t berd_metrics_len(const struct BerdMetrics *metrics);

/**
 * Copies row `index` into `row`.
 *
 * # Safety
 * `metrics` must come from this library; `row` must be writable.
 */
enum BerdStatus berd_metrics_get(const struct BerdMetrics *metrics,
                                 size_t index,
                                 struct BerdMetricRow *row);

/**
 * Writes the rows as CSV.
 *
 * # Safety
 * `metrics` must come from this library; `path` must be NUL-terminated.
 */
enum BerdStatus berd_metrics_write_csv(const struct BerdMetrics *metrics, const char *path);

/**
 * # Safety
 * `metrics` must be NULL or come from this library, and is invalid afterwards.
 */
void berd_metrics_free(struct BerdMetrics *metrics);

/**
 * Builds a frame from `n_receivers * n_symbols` complex samples stored as
 * interleaved `re, im` pairs, receiver-major.
 *
 * # Safety
 * `samples` must point to `2 * n_receivers * n_symbols` doubles; `out` must
 * be writable.
 */
enum BerdStatus berd_frame_new(const double *samples,
                               size_t n_receivers,
                               size_t n_symbols,
                               struct BerdFrame **out);

/**
 * Reads a frame dump file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum BerdStatus berd_frame_load(const char *path, struct BerdFrame **out);

/**
 * # Safety
 * `frame` must be NULL or come from this library, and is invalid afterwards.
 */
void berd_frame_free(struct BerdFrame *frame);

/**
 * Receiver configured from the scenario's candidate grid and limits.
 *
 * # Safety
 * `scenario` must come from this library; `out` must be writable.
 */
enum BerdStatus berd_receiver_new(const struct BerdScenario *scenario, struct BerdReceiver **out);

/**
 * Seed of the receiver's initialiser streams.
 *
 * # Safety
 * `receiver` must come from this library and not be freed.
 */
enum BerdStatus berd_receiver_set_seed(struct BerdReceiver *receiver, uint64_t seed);

/**
 * # Safety
 * `receiver` must be NULL or come from this library, and is invalid afterwards.
 */
void berd_receiver_free(struct BerdReceiver *receiver);

/**
 * Estimates, recognises and detects one frame.
 *
 * # Safety
 * `receiver` and `frame` must come from this library; `out` must be writable.
 */
enum BerdStatus berd_receive(const struct BerdReceiver *receiver,
                             const struct BerdFrame *frame,
                             struct BerdDecision **out);

/**
 * Decided MCS as `modulation/code`, NUL-terminated. `len` receives the
 * required size in bytes including the NUL.
 *
 * # Safety
 * `decision` must come from this library; `buf` must hold `cap` bytes.
 */
enum BerdStatus berd_decision_theta(const struct BerdDecision *decision,
                                    char *buf,
                                    size_t cap,
                                    size_t *len);

/**
 * Decided message bits, one `0`/`1` byte each.
 *
 * # Safety
 * `decision` must come from this library; `buf` must hold `cap` bytes.
 */
enum BerdStatus berd_decision_bits(const struct BerdDecision *decision,
                                   uint8_t *buf,
                                   size_t cap,
                                   size_t *len);

/**
 * Estimated taps of receiver `k` as interleaved `re, im` pairs and its
 * noise power. `len` receives the number of taps.
 *
 * # Safety
 * `decision` must come from this library; `taps` must hold `2 * cap`
 * doubles; `noise_power` must be NULL or writable.
 */
enum BerdStatus berd_decision_channel(const struct BerdDecision *decision,
                                      size_t k,
                                      double *taps,
                                      size_t cap,
                                      size_t *len,
                                      double *noise_power);

/**
 * Number of receivers in the decision.
 *
 * # Safety
 * `decision` must be NULL or come from this library.
 */
size_t berd_decision_receivers(const struct BerdDecision *decision);

/**
 * Outer iterations run by the winning hypothesis.
 *
 * # Safety
 * `decision` must be NULL or come from this library.
 */
size_t berd_decision_outer_iterations(const struct BerdDecision *decision);

/**
 * # Safety
 * `decision` must be NULL or come from this library, and is invalid afterwards.
 */
void berd_decision_free(struct BerdDecision *decision);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BERD_H */
