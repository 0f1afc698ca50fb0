/* C ABI for the align diagnostic pipeline (align-ffi).
 *
 * Generated by cbindgen from crates/ffi/src/lib.rs; do not edit by hand.
 *
 * Conventions:
 *  - Opaque handles own Rust data; free each exactly once with its *_free.
 *  - Functions return AlignStatus; ALIGN_OK is 0. On failure,
 *    align_last_error() returns a thread-local message that stays valid
 *    until the next failing call on the same thread.
 *  - Out-parameter strings are NUL-terminated UTF-8 owned by the library;
 *    release them with align_string_free.
 */

#ifndef ALIGN_H
#define ALIGN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible entry point.
 */
typedef enum AlignStatus {
  ALIGN_STATUS_OK = 0,
  ALIGN_STATUS_INVALID_ARGUMENT = 1,
  ALIGN_STATUS_PARSE_ERROR = 2,
  ALIGN_STATUS_VALIDATION_ERROR = 3,
  ALIGN_STATUS_IO_ERROR = 4,
  ALIGN_STATUS_INTERNAL_ERROR = 5,
} AlignStatus;

/*
 Opaque handle to a validated course dataset.
 */
typedef struct AlignDataset AlignDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Last error message for the current thread. Never NULL; empty when no
 error has occurred. The pointer stays valid until the next failing call
 on this thread.
 */
const char *align_last_error(void);

/*
 Library version as a static NUL-terminated string; do not free.
 */
const char *align_version(void);

/*
 Release a string returned by this library.

 # Safety
 `s` must be a pointer previously returned through an out-parameter of
 this library (or NULL), not yet freed.
 */
void align_string_free(char *s);

/*
 Load and cross-validate a course bundle from its `course.json` manifest.
 On success `*out` owns the dataset; free it with `align_dataset_free`.

 # Safety
 `manifest_path` must be a NUL-terminated string and `out` a valid
 pointer to writable memory.
 */
enum AlignStatus align_dataset_load(const char *manifest_path, struct AlignDataset **out);

/*
 # Safety
 `dataset` must come from `align_dataset_load` and not be freed twice.
 */
void align_dataset_free(struct AlignDataset *dataset);

/*
 # Safety
 `dataset` must be a live handle from `align_dataset_load`.
 */
unsigned long long align_dataset_student_count(const struct AlignDataset *dataset);

/*
 # Safety
 `dataset` must be a live handle from `align_dataset_load`.
 */
unsigned long long align_dataset_question_count(const struct AlignDataset *dataset);

/*
 # Safety
 `dataset` must be a live handle from `align_dataset_load`.
 */
unsigned long long align_dataset_topic_count(const struct AlignDataset *dataset);

/*
 Compute per-student proficiency vectors and skill gaps; `*out_json`
 receives a JSON document equivalent to the CLI's `proficiency.json`.

 # Safety
 `dataset` must be a live handle; `out_json` must be writable.
 */
enum AlignStatus align_proficiency_json(const struct AlignDataset *dataset,
                                        double tau,
                                        double high_min,
                                        double medium_min,
                                        bool include_exams,
                                        char **out_json);

/*
 Harmonic F1 from precision and recall; 0 when both are 0. NaN when an
 argument falls outside the unit interval.
 */
double align_f1_from_pr(double precision, double recall);

/*
 Metrics over a square confusion matrix given in row-major order (rows =
 truth, columns = prediction). `class_names` holds `n_classes`
 NUL-terminated strings. `*out_json` receives the metrics report.

 # Safety
 `counts` must point to `n_classes * n_classes` values, `class_names` to
 `n_classes` valid C strings, and `out_json` must be writable.
 */
enum AlignStatus align_metrics_json(const unsigned long long *counts,
                                    const char *const *class_names,
                                    unsigned long long n_classes,
                                    char **out_json);

/*
 Exam-band ground truth for one dataset as JSON
 `{student: {topic: band}}`.

 # Safety
 `dataset` must be a live handle; `out_json` must be writable.
 */
enum AlignStatus align_ground_truth_json(const struct AlignDataset *dataset,
                                         double high_min,
                                         double medium_min,
                                         char **out_json);

/*
 Generate a deterministic synthetic course bundle into `out_dir`,
 exactly like `align simulate`.

 # Safety
 `out_dir` must be a NUL-terminated string.
 */
enum AlignStatus align_simulate(unsigned long long seed,
                                unsigned long long n_students,
                                unsigned long long n_topics,
                                unsigned long long questions_per_topic,
                                unsigned long long exam_questions_per_topic,
                                double noise,
                                const char *out_dir);

/*
 Convenience accessor used by binding smoke tests: the roster as a
 newline-joined string.

 # Safety
 `dataset` must be a live handle; `out` must be writable.
 */
enum AlignStatus align_dataset_students(const struct AlignDataset *dataset, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALIGN_H */
