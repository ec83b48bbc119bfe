#ifndef DECGNN_DECGNN_H
#define DECGNN_DECGNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DG_API __declspec(dllexport)
#else
#define DG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. A null session or pointer argument
   yields DG_ERR_INTERNAL. */
typedef enum dg_status {
    DG_OK = 0,
    DG_ERR_INTERNAL = 1,
    DG_ERR_CONFIG = 2,
    DG_ERR_DATA = 3,
    DG_ERR_TRAINING = 4
} dg_status;

typedef struct dg_session dg_session;

DG_API const char* dg_version(void);

/* A new session holds the default configuration. */
DG_API dg_status dg_session_create(dg_session** out);
DG_API void dg_session_destroy(dg_session* session);

DG_API dg_status dg_load_config(dg_session* session, const char* path);
DG_API dg_status dg_set_config_json(dg_session* session, const char* json_text);
/* Dotted key such as "gnn.lr"; value is JSON or a bare string. */
DG_API dg_status dg_set_option(dg_session* session, const char* key, const char* value);
DG_API dg_status dg_set_seed(dg_session* session, uint64_t master_seed);
DG_API dg_status dg_set_output_dir(dg_session* session, const char* path);

/* Current configuration as JSON; valid until the next call on the session. */
DG_API const char* dg_config_json(dg_session* session);

/* One of synth, preprocess, train-ae, cluster, train-gnn, grid, predict, run-all. */
DG_API dg_status dg_run_stage(dg_session* session, const char* stage);

/* Warnings from the most recent dg_run_stage, newline separated. */
DG_API const char* dg_last_warnings(const dg_session* session);
/* Message of the most recent failure on this session, or "". */
DG_API const char* dg_last_error(const dg_session* session);

/* Stateless helpers. Results go to *out; errors are reported as status only. */
DG_API dg_status dg_roc_auc(const double* scores, const int* labels, size_t n, double* out);
DG_API dg_status dg_silhouette(const double* points, size_t n, size_t dim, const int* assignments, double* out);

#ifdef __cplusplus
}
#endif

#endif
