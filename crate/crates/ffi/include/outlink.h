#ifndef OUTLINK_H
#define OUTLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Codes 2 to 4 match the CLI exit codes.
typedef enum OutlinkStatus {
  OUTLINK_STATUS_OK = 0,
  // A required pointer was NULL or a string was not UTF-8.
  OUTLINK_STATUS_NULL_ARGUMENT = 1,
  // Invalid argument, config or schema.
  OUTLINK_STATUS_INVALID_ARGUMENT = 2,
  // Input data or I/O failure.
  OUTLINK_STATUS_DATA_ERROR = 3,
  OUTLINK_STATUS_NON_CONVERGENCE = 4,
  // Output buffer too small; the required length is still reported.
  OUTLINK_STATUS_BUFFER_TOO_SMALL = 5,
  // A panic was caught at the boundary.
  OUTLINK_STATUS_INTERNAL = 6,
} OutlinkStatus;

// A series with its link history and neighbour index.
typedef struct OutlinkDataset OutlinkDataset;

// A trained model bundle.
typedef struct OutlinkModel OutlinkModel;

// A loaded or generated crawl series.
typedef struct OutlinkSeries OutlinkSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string.
// Valid until the next failing call on the same thread.
const char *outlink_last_error(void);

// Library version as a static string.
const char *outlink_version(void);

// Loads every `crawl_*.jsonl` file of `dir`.
//
// # Safety
// `dir` must be a valid C string and `out` a valid pointer.
enum OutlinkStatus outlink_series_load(const char *dir, struct OutlinkSeries **out);

// Generates a synthetic series from a generator config in TOML; NULL
// selects the defaults.
//
// # Safety
// `config_toml` must be NULL or a valid C string; `out` a valid pointer.
enum OutlinkStatus outlink_series_generate(const char *config_toml, struct OutlinkSeries **out);

// # Safety
// `series` must be a live handle; the out pointers must be valid.
enum OutlinkStatus outlink_series_shape(const struct OutlinkSeries *series,
                                        uintptr_t *n_pages,
                                        uintptr_t *n_crawls);

// # Safety
// `series` must be NULL or a handle not yet freed.
void outlink_series_free(struct OutlinkSeries *series);

// Builds a dataset over a copy of `series` with `neighbors` related pages.
//
// # Safety
// `series` must be a live handle and `out` a valid pointer.
enum OutlinkStatus outlink_dataset_new(const struct OutlinkSeries *series,
                                       uintptr_t neighbors,
                                       struct OutlinkDataset **out);

// # Safety
// `dataset` must be NULL or a handle not yet freed.
void outlink_dataset_free(struct OutlinkDataset *dataset);

// Trains the model of an experiment config (TOML) on its first split.
//
// # Safety
// `dataset` must be a live handle, `config_toml` a valid C string and
// `out` a valid pointer.
enum OutlinkStatus outlink_model_train(const struct OutlinkDataset *dataset,
                                       const char *config_toml,
                                       struct OutlinkModel **out);

// # Safety
// `path` must be a valid C string and `out` a valid pointer.
enum OutlinkStatus outlink_model_read(const char *path, struct OutlinkModel **out);

// # Safety
// `model` must be a live handle and `path` a valid C string.
enum OutlinkStatus outlink_model_write(const struct OutlinkModel *model, const char *path);

// Predicts every page of `dataset` into `values` (length `capacity`).
// `written` receives the number of pages even when the buffer is too small.
//
// # Safety
// Handles must be live; `values` must hold `capacity` doubles (or be NULL
// with `capacity` 0); `written` must be valid.
enum OutlinkStatus outlink_model_predict(const struct OutlinkModel *model,
                                         const struct OutlinkDataset *dataset,
                                         double *values,
                                         uintptr_t capacity,
                                         uintptr_t *written);

// # Safety
// `model` must be NULL or a handle not yet freed.
void outlink_model_free(struct OutlinkModel *model);

// Runs a full experiment from a TOML config, writing its artifacts.
//
// # Safety
// `config_toml` must be a valid C string.
enum OutlinkStatus outlink_run_experiment(const char *config_toml);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OUTLINK_H */
