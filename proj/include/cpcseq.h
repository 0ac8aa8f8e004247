#ifndef CPCSEQ_H
#define CPCSEQ_H

/* C interface to the cpcseq library: self-supervised pre-training and
 * activity classification for multichannel time-series.
 *
 * Every function returns a cpcseq_status code; on failure a description is
 * available from cpcseq_last_error() until the next call on the same thread.
 * Objects returned through out-parameters are owned by the caller and must
 * be released with the matching _free function. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CPCSEQ_API __declspec(dllexport)
#else
#define CPCSEQ_API __attribute__((visibility("default")))
#endif

typedef enum cpcseq_status {
  CPCSEQ_OK = 0,
  CPCSEQ_USAGE_ERROR = 1,   /* bad arguments or config */
  CPCSEQ_DATA_ERROR = 2,    /* unreadable or malformed data */
  CPCSEQ_NUMERIC_ERROR = 3, /* training diverged (non-finite loss) */
  CPCSEQ_INTERNAL_ERROR = 4
} cpcseq_status;

/* Opaque handles */
typedef struct cpcseq_recordings cpcseq_recordings; /* per-subject streams */
typedef struct cpcseq_windows cpcseq_windows;       /* segmented windows */

CPCSEQ_API const char* cpcseq_version(void);
CPCSEQ_API const char* cpcseq_last_error(void);

/* Runs one pipeline stage. `command` is one of synth | pretrain | finetune |
 * evaluate | sweep; `config_json` is the resolved configuration document;
 * artifacts (checkpoint, history, metrics, reports, plots, resolved config,
 * log) are written under `out_dir`. A non-empty out_dir is refused unless
 * `force` is non-zero. */
CPCSEQ_API int cpcseq_run(const char* command, const char* config_json, const char* out_dir,
                          int force);

/* Validates a config without running it. On success *violations_json holds a
 * JSON array of violation strings (empty array = runnable); release it with
 * cpcseq_string_free. */
CPCSEQ_API int cpcseq_validate(const char* command, const char* config_json,
                               char** violations_json);
CPCSEQ_API void cpcseq_string_free(char* s);

/* Recordings: canonical CSV loading, synthetic generation, round-trip. */
CPCSEQ_API int cpcseq_recordings_load(const char* path, cpcseq_recordings** out);
CPCSEQ_API int cpcseq_recordings_synthesize(const char* config_json, cpcseq_recordings** out);
CPCSEQ_API int cpcseq_recordings_save_csv(const cpcseq_recordings* rs, const char* path);
CPCSEQ_API int cpcseq_recordings_info(const cpcseq_recordings* rs, size_t* num_recordings,
                                      size_t* num_channels, int* num_classes);
CPCSEQ_API void cpcseq_recordings_free(cpcseq_recordings* rs);

/* Sliding-window segmentation of a recording set. */
CPCSEQ_API int cpcseq_windows_segment(const cpcseq_recordings* rs, double window_seconds,
                                      double overlap_fraction, cpcseq_windows** out);
CPCSEQ_API int cpcseq_windows_info(const cpcseq_windows* ds, size_t* num_windows, int* window_len,
                                   int* num_channels);
CPCSEQ_API void cpcseq_windows_free(cpcseq_windows* ds);

/* Macro-F1 / precision / recall / confusion report over integer label
 * vectors, returned as a JSON document. */
CPCSEQ_API int cpcseq_compute_metrics(const int* truth, const int* predicted, size_t n,
                                      int num_classes, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* CPCSEQ_H */
