#ifndef MILNOR_CYCLES_H
#define MILNOR_CYCLES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum McStatus {
  MC_STATUS_OK = 0,
  MC_STATUS_NULL_POINTER = 1,
  MC_STATUS_INVALID_UTF8 = 2,
  MC_STATUS_PARSE_ERROR = 3,
  MC_STATUS_INVALID_ARGUMENT = 4,
  MC_STATUS_CRIT_FAILURE = 5,
  MC_STATUS_BUFFER_TOO_SMALL = 6,
  MC_STATUS_INTERNAL = 7,
} McStatus;

// Outcome of comparing the detected cycle count with the bound. The values
// equal the command-line exit codes.
typedef enum McVerdict {
  MC_VERDICT_INEQUALITY_HOLDS = 0,
  MC_VERDICT_INEQUALITY_VIOLATED = 2,
  MC_VERDICT_INCONCLUSIVE = 3,
} McVerdict;

// Opaque planar polynomial vector field.
typedef struct McField McField;

// Opaque analysis report.
typedef struct McReport McReport;

typedef struct McCritPoint {
  size_t id;
  double x;
  double y;
  // Jacobian determinant at the point.
  double det;
  // Poincaré index.
  int32_t index;
  bool nondegenerate;
  // Existence and uniqueness proven on the isolating box.
  bool certified;
} McCritPoint;

typedef struct McSummary {
  // Number of critical points found.
  size_t critical_points;
  // Sum of the vanishing-cycle counts over stable points.
  size_t bound;
  // Number of confirmed limit cycles.
  size_t detected;
  enum McVerdict verdict;
} McSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failing call on this thread, or `NULL`. The
// pointer stays valid until the next failing call on the same thread.
const char *mc_last_error(void);

// Library version as a static string.
const char *mc_version(void);

// Releases a string returned by this library. `NULL` is ignored.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void mc_string_free(char *s);

// Parses a field from the text of a `.vf` file (`P = …`, `Q = …`, optional
// `box = [x0, x1] x [y0, y1]` and `name = …`).
//
// # Safety
// `src` must be a NUL-terminated string and `out` a writable pointer.
enum McStatus mc_field_parse(const char *src, struct McField **out);

// Writes the field as JSON (`p`, `q`, `box`, `name`) to `*out`.
//
// # Safety
// `field` must be a live handle and `out` a writable pointer.
enum McStatus mc_field_json(const struct McField *field, char **out);

// Releases a field. `NULL` is ignored.
//
// # Safety
// `field` must come from this library and must not be used afterwards.
void mc_field_free(struct McField *field);

// Finds the critical points of `field`, sorted by `(x, y)`.
//
// `*len` receives the number of points. If it exceeds `cap` nothing is
// written to `buf` and [`McStatus::BufferTooSmall`] is returned, so a call
// with `cap = 0` and `buf = NULL` queries the size.
//
// # Safety
// `field` must be a live handle, `config_json` `NULL` or a NUL-terminated
// string, `buf` valid for `cap` writes and `len` writable.
enum McStatus mc_critpoints(const struct McField *field,
                            const char *config_json,
                            struct McCritPoint *buf,
                            size_t cap,
                            size_t *len);

// Runs the full pipeline and stores the report in `*out`. A failure to
// isolate the critical points is not an error here: the report carries an
// inconclusive verdict and the reason.
//
// # Safety
// `field` must be a live handle, `config_json` `NULL` or a NUL-terminated
// string and `out` a writable pointer.
enum McStatus mc_analyze(const struct McField *field,
                         const char *config_json,
                         struct McReport **out);

// Copies the headline numbers of a report into `*out`.
//
// # Safety
// `report` must be a live handle and `out` a writable pointer.
enum McStatus mc_report_summary(const struct McReport *report, struct McSummary *out);

// Writes the full report as JSON to `*out`. With `with_timestamp` false the
// timestamp is blank and the output is identical across runs with the same
// input and configuration.
//
// # Safety
// `report` must be a live handle and `out` a writable pointer.
enum McStatus mc_report_json(const struct McReport *report, bool with_timestamp, char **out);

// Releases a report. `NULL` is ignored.
//
// # Safety
// `report` must come from this library and must not be used afterwards.
void mc_report_free(struct McReport *report);

// Stores `V + s·A` in `*out`, where `A` is an affine field drawn from a
// generator seeded with `seed`. `s = 0` copies the field.
//
// # Safety
// `field` must be a live handle and `out` a writable pointer.
enum McStatus mc_morsify(const struct McField *field,
                         double s,
                         uint64_t seed,
                         struct McField **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MILNOR_CYCLES_H */
