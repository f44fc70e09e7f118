#ifndef PINGPONG_H
#define PINGPONG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stdint.h>

// Result code of every call.
typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_POINTER = 1,
  // Rejected configuration or argument.
  PP_STATUS_INVALID_ARGUMENT = 2,
  // The engine hit an internal invariant violation.
  PP_STATUS_ENGINE = 3,
  // The requested figure is undefined for this configuration.
  PP_STATUS_NOT_AVAILABLE = 4,
  // An exact value does not fit in 64-bit integers.
  PP_STATUS_OVERFLOW = 5,
  // The session already ended with a stalled round.
  PP_STATUS_SESSION_ENDED = 6,
  // A Rust panic was caught at the boundary.
  PP_STATUS_PANIC = 7,
} PpStatus;

typedef enum PpVariant {
  PP_VARIANT_ORIGINAL = 0,
  PP_VARIANT_MODIFIED = 1,
} PpVariant;

typedef enum PpStrategy {
  PP_STRATEGY_NONE = 0,
  PP_STRATEGY_FORWARD_MEASURE = 1,
  PP_STRATEGY_RETURN_MEASURE = 2,
  PP_STRATEGY_INTERCEPT_SUBSTITUTE = 3,
  PP_STRATEGY_HOLD_UNTIL_ANNOUNCE = 4,
} PpStrategy;

// Figures available from a report.
typedef enum PpReportField {
  PP_REPORT_FIELD_PER_ROUND_DETECTION = 0,
  PP_REPORT_FIELD_CONDITIONAL_DETECTION_CONTROL_MEASURE = 1,
  PP_REPORT_FIELD_CONDITIONAL_DETECTION_SENDBACK = 2,
  PP_REPORT_FIELD_STALL_PROBABILITY = 3,
  PP_REPORT_FIELD_CONDITIONAL_STALL_MESSAGE = 4,
  PP_REPORT_FIELD_CONDITIONAL_STALL_SENDBACK = 5,
  PP_REPORT_FIELD_MESSAGE_PROBABILITY = 6,
  PP_REPORT_FIELD_CONTROL_MEASURE_PROBABILITY = 7,
  PP_REPORT_FIELD_CONTROL_SENDBACK_PROBABILITY = 8,
  PP_REPORT_FIELD_MESSAGE_BER = 9,
  PP_REPORT_FIELD_MESSAGE_ANOMALY = 10,
  PP_REPORT_FIELD_EVE_AGREEMENT = 11,
  PP_REPORT_FIELD_EXPECTED_ROUNDS_TO_DETECTION = 12,
} PpReportField;

typedef enum PpMode {
  PP_MODE_MESSAGE = 0,
  PP_MODE_CONTROL_MEASURE = 1,
  PP_MODE_CONTROL_SENDBACK = 2,
} PpMode;

// Exact per-round analysis.
typedef struct PpReport PpReport;

// A run advanced one round at a time.
typedef struct PpSession PpSession;

// Counters of a finished run.
typedef struct PpStats PpStats;

// Protocol parameters. Probabilities are exact fractions `num / den`.
typedef struct PpProtocol {
  enum PpVariant variant;
  uint32_t control_num;
  uint32_t control_den;
  // Share of control rounds that measure (modified variant).
  uint32_t c0_num;
  uint32_t c0_den;
  bool receipt_enabled;
} PpProtocol;

// Raw counters of a run or session.
typedef struct PpCounts {
  uint64_t rounds_executed;
  uint64_t message_rounds;
  uint64_t control_measure_rounds;
  uint64_t control_sendback_rounds;
  uint64_t bit_errors;
  uint64_t anomalies;
  uint64_t detections;
  uint64_t stalls;
  // 1-based; 0 when nothing was detected.
  uint64_t first_detection_round;
} PpCounts;

// Outcome of one stepped round. Bits are -1 when absent; `decoded` is -2
// for an anomalous Bell outcome.
typedef struct PpRound {
  uint64_t round_index;
  enum PpMode mode;
  int32_t alice_bit;
  int32_t decoded;
  int32_t eve_bit;
  bool detected;
  bool stalled;
} PpRound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *pp_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void pp_string_free(char *s);

// Computes the exact report for `protocol` under `strategy`.
//
// # Safety
// `protocol` must point to a valid `PpProtocol`; `out` must be writable.
enum PpStatus pp_report_new(const struct PpProtocol *protocol,
                            enum PpStrategy strategy,
                            struct PpReport **out);

// Reads one figure as a double.
//
// # Safety
// `report` must be live; `value` must be writable.
enum PpStatus pp_report_get(const struct PpReport *report, enum PpReportField which, double *value);

// Reads one figure as an exact fraction in lowest terms.
//
// # Safety
// `report` must be live; `num` and `den` must be writable.
enum PpStatus pp_report_get_exact(const struct PpReport *report,
                                  enum PpReportField which,
                                  int64_t *num,
                                  int64_t *den);

// Mutual information between Alice and Bob (`ab`) and Alice and Eve (`ae`), in bits.
//
// # Safety
// `report` must be live; `ab` and `ae` must be writable.
enum PpStatus pp_report_mutual_information(const struct PpReport *report, double *ab, double *ae);

// The report as the JSON document printed by `pingpong oracle`.
//
// # Safety
// `report` must be live; `out` must be writable. Free the result with
// `pp_string_free`.
enum PpStatus pp_report_to_json(const struct PpReport *report, char **out);

// # Safety
// `report` must come from `pp_report_new` and not be used afterwards.
void pp_report_free(struct PpReport *report);

// Runs a Monte Carlo simulation with uniformly random message bits.
//
// # Safety
// `protocol` must point to a valid `PpProtocol`; `out` must be writable.
enum PpStatus pp_run(const struct PpProtocol *protocol,
                     enum PpStrategy strategy,
                     uint64_t rounds,
                     uint64_t seed,
                     bool stop_on_detection,
                     struct PpStats **out);

// # Safety
// `stats` must be live; `out` must be writable.
enum PpStatus pp_stats_counts(const struct PpStats *stats, struct PpCounts *out);

// Empirical mutual information of the run, in bits.
//
// # Safety
// `stats` must be live; `ab` and `ae` must be writable.
enum PpStatus pp_stats_mutual_information(const struct PpStats *stats, double *ab, double *ae);

// Counters and rates as JSON (the `oracle` block is null).
//
// # Safety
// `stats` must be live; `out` must be writable. Free the result with
// `pp_string_free`.
enum PpStatus pp_stats_to_json(const struct PpStats *stats, char **out);

// # Safety
// `stats` must come from this library and not be used afterwards.
void pp_stats_free(struct PpStats *stats);

// Opens a session that runs one round per `pp_session_step`. Rounds match
// those of `pp_run` with the same seed.
//
// # Safety
// `protocol` must point to a valid `PpProtocol`; `out` must be writable.
enum PpStatus pp_session_new(const struct PpProtocol *protocol,
                             enum PpStrategy strategy,
                             uint64_t seed,
                             struct PpSession **out);

// Runs the next round. A stalled round ends the session; later calls
// return `SessionEnded`.
//
// # Safety
// `session` must be live; `round` may be null.
enum PpStatus pp_session_step(struct PpSession *session, struct PpRound *round);

// Counters accumulated so far.
//
// # Safety
// `session` must be live; `out` must be writable.
enum PpStatus pp_session_counts(const struct PpSession *session, struct PpCounts *out);

// # Safety
// `session` must come from `pp_session_new` and not be used afterwards.
void pp_session_free(struct PpSession *session);

// Library version as a static NUL-terminated string.
const char *pp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINGPONG_H */
