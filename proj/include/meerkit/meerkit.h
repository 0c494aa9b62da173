#ifndef MEERKIT_H
#define MEERKIT_H

/*
 * Meerkit C interface.
 *
 * Every function returns a meerkit_status. On failure a human-readable
 * message is available from meerkit_last_error() on the calling thread until
 * the next failing call on that thread. Handles are opaque; each *_free
 * function accepts NULL. Strings returned through char** parameters are
 * owned by the caller and released with meerkit_string_free().
 */

#include <stddef.h>

#if defined(MEERKIT_BUILDING_LIBRARY)
#define MEERKIT_API __attribute__((visibility("default")))
#else
#define MEERKIT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum meerkit_status {
    MEERKIT_OK = 0,
    MEERKIT_ERR_CONFIG = 2,
    MEERKIT_ERR_DATA = 3,
    MEERKIT_ERR_NUMERICAL = 4,
    MEERKIT_ERR_IO = 5,
    MEERKIT_ERR_INVALID_ARGUMENT = 6,
    MEERKIT_ERR_INTERNAL = 7
} meerkit_status;

#define MEERKIT_CATCH24_DIM 24
#define MEERKIT_CNN_HIDDEN_DIM 80
#define MEERKIT_FILTER_BINS 513

MEERKIT_API const char* meerkit_version(void);
MEERKIT_API const char* meerkit_last_error(void);
MEERKIT_API void meerkit_string_free(char* s);

/* ---- Run configuration and pipeline commands ---------------------------- */

typedef struct meerkit_config meerkit_config;

/* Relative paths inside the file resolve against the file's directory. */
MEERKIT_API meerkit_status meerkit_config_load(const char* path, meerkit_config** out);
/* base_dir may be NULL (current directory). */
MEERKIT_API meerkit_status meerkit_config_from_json(const char* json, const char* base_dir, meerkit_config** out);
/*
 * Replaces one setting. `key` is a top-level key or a dotted path such as
 * "svm.tol"; `value_json` is a JSON value ("7", "\"train\"", "false").
 * The whole config is revalidated and the change is rolled back on error.
 * An explicit "seed" set here takes precedence over MEERKIT_SEED.
 */
MEERKIT_API meerkit_status meerkit_config_override(meerkit_config* config, const char* key, const char* value_json);
/* Fully resolved config (defaults spelled out, MEERKIT_SEED applied). */
MEERKIT_API meerkit_status meerkit_config_resolved_json(const meerkit_config* config, char** out_json);
MEERKIT_API void meerkit_config_free(meerkit_config* config);

typedef void (*meerkit_log_fn)(const char* message, void* user_data);

/*
 * Runs one pipeline command: "prepare", "extract", "train-cnn", "classify",
 * "analyze-filters", "render" or "report". `argument` is the feature set id
 * for extract/classify and the render target (a feature set id or
 * "filters"); NULL otherwise. `options_json` may be NULL or an object with
 * optional keys "dry_run", "skip_bad" (booleans) and "model" (path).
 * On success *out_summary (if non-NULL) receives a JSON object with keys
 * "plan", "outputs" and "summary".
 */
MEERKIT_API meerkit_status meerkit_run_command(const meerkit_config* config, const char* command, const char* argument,
                                               const char* options_json, meerkit_log_fn log, void* log_user_data,
                                               char** out_summary);

/* ---- Feature tables ----------------------------------------------------- */

typedef struct meerkit_features meerkit_features;

/* expected_dimension 0 accepts any width. */
MEERKIT_API meerkit_status meerkit_features_load(const char* csv_path, size_t expected_dimension,
                                                 meerkit_features** out);
MEERKIT_API size_t meerkit_features_rows(const meerkit_features* t);
MEERKIT_API size_t meerkit_features_dimension(const meerkit_features* t);
/* Borrowed pointer, valid for the lifetime of the handle. */
MEERKIT_API const char* meerkit_features_call_id(const meerkit_features* t, size_t row);
MEERKIT_API meerkit_status meerkit_features_row(const meerkit_features* t, size_t row, double* out, size_t out_len);
MEERKIT_API void meerkit_features_free(meerkit_features* t);

/* ---- catch24 ------------------------------------------------------------ */

MEERKIT_API meerkit_status meerkit_catch24(const double* series, size_t length, double out[MEERKIT_CATCH24_DIM]);

/* ---- SVM ---------------------------------------------------------------- */

typedef struct meerkit_svm meerkit_svm;

/*
 * x is row-major n x d; labels take values 0..n_classes-1 and every class
 * must occur. params_json may be NULL or hold any of "kernel" ("linear",
 * "rbf", "polynomial", "sigmoid"), "C", "gamma", "degree", "coef0", "tol".
 */
MEERKIT_API meerkit_status meerkit_svm_train(const double* x, size_t n, size_t d, const int* labels,
                                             size_t n_classes, const char* params_json, meerkit_svm** out);
MEERKIT_API meerkit_status meerkit_svm_predict(const meerkit_svm* model, const double* x, size_t n, size_t d,
                                               int* out_labels);
MEERKIT_API meerkit_status meerkit_svm_save(const meerkit_svm* model, const char* path);
MEERKIT_API meerkit_status meerkit_svm_load(const char* path, meerkit_svm** out);
MEERKIT_API void meerkit_svm_free(meerkit_svm* model);

/* ---- CNN ---------------------------------------------------------------- */

typedef struct meerkit_cnn meerkit_cnn;

MEERKIT_API meerkit_status meerkit_cnn_load(const char* path, meerkit_cnn** out);
MEERKIT_API size_t meerkit_cnn_n_classes(const meerkit_cnn* model);
/* hidden receives 80 values; logits (may be NULL) receives n_classes values. */
MEERKIT_API meerkit_status meerkit_cnn_forward(const meerkit_cnn* model, const double* waveform, size_t length,
                                               double hidden[MEERKIT_CNN_HIDDEN_DIM], double* logits);
MEERKIT_API meerkit_status meerkit_cnn_filter_response(const meerkit_cnn* model, double sample_rate_hz,
                                                       double freqs_hz[MEERKIT_FILTER_BINS],
                                                       double log_cumulative_magnitude[MEERKIT_FILTER_BINS]);
MEERKIT_API void meerkit_cnn_free(meerkit_cnn* model);

/* ---- Metrics ------------------------------------------------------------ */

/* counts is a row-major k x k confusion matrix, rows = true classes. */
MEERKIT_API meerkit_status meerkit_uar(const long* counts, size_t k, double* out);

#ifdef __cplusplus
}
#endif

#endif /* MEERKIT_H */
