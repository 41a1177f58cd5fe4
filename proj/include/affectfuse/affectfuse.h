#ifndef AFFECTFUSE_H
#define AFFECTFUSE_H

#include <stddef.h>

#if defined(AFX_BUILDING_LIBRARY)
#define AFX_API __attribute__((visibility("default")))
#else
#define AFX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum afx_status {
  AFX_OK = 0,
  AFX_E_INVALID_ARGUMENT,
  AFX_E_CONFIG,
  AFX_E_IO,
  AFX_E_MISSING_COLUMN,
  AFX_E_NON_UNIFORM_SAMPLING,
  AFX_E_NON_FINITE_SAMPLE,
  AFX_E_RANGE_VIOLATION,
  AFX_E_ORPHAN_FILE,
  AFX_E_MALFORMED_NAME,
  AFX_E_INVALID_SPEC,
  AFX_E_INVALID_CUTOFF,
  AFX_E_SIGNAL_TOO_SHORT,
  AFX_E_WINDOW_TOO_SMALL,
  AFX_E_INVALID_WINDOW,
  AFX_E_TOO_SHORT,
  AFX_E_TOO_FEW_PEAKS,
  AFX_E_UNKNOWN_KIND,
  AFX_E_TIMESTAMP_OUT_OF_RANGE,
  AFX_E_DELAY_OUT_OF_RANGE,
  AFX_E_EMPTY_INPUT,
  AFX_E_INCOMPLETE_INDEX,
  AFX_E_NO_MATCHING_MODEL,
  AFX_E_SHAPE_MISMATCH,
  AFX_E_EMPTY_MEMBERS,
  AFX_E_LENGTH_MISMATCH,
  AFX_E_EMPTY_LIST,
  AFX_E_EMPTY,
  AFX_E_EMPTY_FOLD,
  AFX_E_SCHEMA_MISMATCH,
  AFX_E_INTERNAL
} afx_status;

/* Opaque handles. */
typedef struct afx_config afx_config;
typedef struct afx_result afx_result;

AFX_API const char* afx_version(void);

/* "InvalidArgument", "ConfigError", ... */
AFX_API const char* afx_status_name(afx_status status);

/* Message of the last failed call on this thread ("" if none). Valid until
   the next failing call on the same thread. */
AFX_API const char* afx_last_error(void);

/* Configuration: defaults, INI file, and "section.key=value" overrides. */
AFX_API afx_status afx_config_new(afx_config** out);
AFX_API afx_status afx_config_load(const char* path, afx_config** out);
AFX_API void afx_config_free(afx_config* cfg);
AFX_API afx_status afx_config_set(afx_config* cfg, const char* key, const char* value);
AFX_API afx_status afx_config_override(afx_config* cfg, const char* assignment);
/* Copies the NUL-terminated value into buf (truncated to cap). *needed gets
   the full length including the terminator. buf may be NULL when cap == 0. */
AFX_API afx_status afx_config_get(const afx_config* cfg, const char* key, char* buf, size_t cap, size_t* needed);
/* Effective configuration as INI text, same buffer convention. */
AFX_API afx_status afx_config_dump(const afx_config* cfg, char* buf, size_t cap, size_t* needed);

/* Runs one of: validate, synth, run, score, lag-sweep, inspect. */
AFX_API afx_status afx_run_command(const afx_config* cfg, const char* command, afx_result** out);
AFX_API size_t afx_result_line_count(const afx_result* result);
AFX_API const char* afx_result_line(const afx_result* result, size_t index);
AFX_API void afx_result_free(afx_result* result);

/* Numeric helpers. */
AFX_API afx_status afx_rmse(const double* pred, const double* truth, size_t n, double* out);
/* Moving average over `window` samples, then clamp to [0.5, 9.5]. out may alias in. */
AFX_API afx_status afx_postprocess_track(const double* in, size_t n, int window, double* out);
/* Elementwise mean of `count` tracks of length n. */
AFX_API afx_status afx_late_fuse_mean(const double* const* tracks, size_t count, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
