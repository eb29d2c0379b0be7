#ifndef EOL_MISTRUST_H
#define EOL_MISTRUST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum EmStatus {
  EM_STATUS_OK = 0,
  EM_STATUS_NULL_POINTER = 1,
  EM_STATUS_INVALID_UTF8 = 2,
  EM_STATUS_IO = 3,
  /*
   Malformed input data: schema, row or referential errors.
   */
  EM_STATUS_INVALID_DATA = 4,
  EM_STATUS_INVALID_ARGUMENT = 5,
  /*
   Degenerate statistics: single-class labels, empty or constant samples.
   */
  EM_STATUS_DEGENERATE = 6,
  EM_STATUS_PANIC = 7,
} EmStatus;

/*
 Opaque loaded or generated dataset.
 */
typedef struct EmDataset EmDataset;

/*
 Opaque fitted mistrust model.
 */
typedef struct EmModel EmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null if none.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *em_last_error_message(void);

/*
 Loads the CSV tables in `dir`. With `strict` nonzero the first malformed
 row is an error, otherwise malformed rows are skipped.

 # Safety
 `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EmStatus em_dataset_load(const char *dir, int32_t strict, struct EmDataset **out);

/*
 Generates a synthetic dataset with default settings apart from size and seed.

 # Safety
 `out` must be a valid pointer.
 */
enum EmStatus em_dataset_synth(size_t n_admissions, uint64_t seed, struct EmDataset **out);

/*
 Number of admissions in the dataset, 0 for a null handle.

 # Safety
 `ds` must be null or a handle from this library.
 */
size_t em_dataset_admission_count(const struct EmDataset *ds);

/*
 # Safety
 `ds` must be null or a handle from this library not yet freed.
 */
void em_dataset_free(struct EmDataset *ds);

/*
 Fits the mistrust model on the notes population with default cohort,
 label and feature settings.

 # Safety
 `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum EmStatus em_model_train(const struct EmDataset *ds,
                             double c,
                             double tol,
                             size_t max_iter,
                             struct EmModel **out);

/*
 Reads a model CSV written by the CLI or [`em_model_save`].

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EmStatus em_model_load(const char *path, struct EmModel **out);

/*
 # Safety
 `model` must be a live model handle and `path` a NUL-terminated string.
 */
enum EmStatus em_model_save(const struct EmModel *model, const char *path);

/*
 # Safety
 `model` must be null or a handle from this library not yet freed.
 */
void em_model_free(struct EmModel *model);

/*
 Number of feature weights, 0 for a null handle.

 # Safety
 `model` must be null or a live model handle.
 */
size_t em_model_n_features(const struct EmModel *model);

/*
 # Safety
 `model` must be null or a live model handle.
 */
double em_model_intercept(const struct EmModel *model);

/*
 1 if the solver reached its tolerance, 0 otherwise or for a null handle.

 # Safety
 `model` must be null or a live model handle.
 */
int32_t em_model_converged(const struct EmModel *model);

/*
 Probabilities for `n_rows` dense rows stored row-major in `x`, each of
 length [`em_model_n_features`]. Results go to `out[0..n_rows]`.

 # Safety
 `x` must hold `n_rows * n_features` doubles and `out` room for `n_rows`.
 */
enum EmStatus em_model_predict(const struct EmModel *model,
                               const double *x,
                               size_t n_rows,
                               size_t n_cols,
                               double *out);

/*
 Scores every admission of `ds` and writes `admission_id,score` rows to `path`.

 # Safety
 Handles must be live and `path` a NUL-terminated string.
 */
enum EmStatus em_score_to_csv(const struct EmModel *model,
                              const struct EmDataset *ds,
                              const char *path);

/*
 Runs the full pipeline with default settings and writes the report files into `out_dir`.

 # Safety
 `ds` must be a live handle and `out_dir` a NUL-terminated string.
 */
enum EmStatus em_pipeline_run(const struct EmDataset *ds, const char *out_dir);

/*
 Two-sided Mann-Whitney U test. `u` receives U for the first sample
 (pairs with a > b, ties counting half). Exact when `nx + ny <= exact_max_total`.

 # Safety
 `x` and `y` must hold `nx` and `ny` doubles; `u` and `p` must be valid.
 */
enum EmStatus em_mann_whitney(const double *x,
                              size_t nx,
                              const double *y,
                              size_t ny,
                              size_t exact_max_total,
                              int32_t continuity_correction,
                              double *u,
                              double *p);

/*
 Total treatment minutes of one admission's spans after merging gaps of
 at most `max_gap` minutes. With `count_gaps` zero, absorbed gaps are not counted.

 # Safety
 `starts` and `ends` must hold `n` values each; `out` must be valid.
 */
enum EmStatus em_merged_duration(const int64_t *starts,
                                 const int64_t *ends,
                                 size_t n,
                                 int64_t max_gap,
                                 int32_t count_gaps,
                                 int64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EOL_MISTRUST_H */
