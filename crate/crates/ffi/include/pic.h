#ifndef PIC_FFI_H
#define PIC_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PicStatus {
  PIC_STATUS_OK = 0,
  PIC_STATUS_NULL_POINTER = 1,
  PIC_STATUS_INVALID_ARGUMENT = 2,
  PIC_STATUS_TOO_FEW_BINS = 3,
  PIC_STATUS_DEGENERATE = 4,
  PIC_STATUS_IO = 5,
  PIC_STATUS_PANIC = 6,
} PicStatus;

// Opaque return matrix.
typedef struct PicMatrix PicMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the next call.
const char *pic_last_error(void);

// Library version as a static NUL-terminated string.
const char *pic_version(void);

// Builds a matrix from `n * m` row-major returns.
//
// # Safety
// `values` must point to `n * m` doubles and `out` must be writable.
enum PicStatus pic_matrix_from_values(const double *values,
                                      size_t n,
                                      size_t m,
                                      struct PicMatrix **out);

// Samples a matrix from a named environment with its default random policy.
// `horizon` 0 keeps the environment default.
//
// # Safety
// `env_name` must be a NUL-terminated string and `out` must be writable.
enum PicStatus pic_matrix_sample(const char *env_name,
                                 size_t horizon,
                                 size_t n,
                                 size_t m,
                                 uint64_t seed,
                                 struct PicMatrix **out);

// Releases a matrix. NULL is ignored.
//
// # Safety
// `matrix` must come from this library and not be used afterwards.
void pic_matrix_free(struct PicMatrix *matrix);

// # Safety
// `matrix` must be a live handle; `n` and `m` writable.
enum PicStatus pic_matrix_shape(const struct PicMatrix *matrix, size_t *n, size_t *m);

// Copies the returns row-major into `buf`, which holds `len` doubles.
//
// # Safety
// `matrix` must be a live handle and `buf` must hold `len` doubles.
enum PicStatus pic_matrix_values(const struct PicMatrix *matrix, double *buf, size_t len);

// Histogram mutual information between parameters and returns.
// `allow_few_bins` nonzero downgrades the bins-vs-episodes check to a warning.
//
// # Safety
// `matrix` must be a live handle and `pic` writable.
enum PicStatus pic_estimate_pic(const struct PicMatrix *matrix,
                                size_t bins,
                                int32_t allow_few_bins,
                                double *pic);

// Optimality mutual information at the best temperature.
//
// # Safety
// `matrix` must be a live handle; `poic` and `eta` writable.
enum PicStatus pic_estimate_poic(const struct PicMatrix *matrix, double *poic, double *eta);

// Normalized score of an average return against a random-sampling range.
// Pass NaN for `r_max_algo` when there is none.
//
// # Safety
// `score` must be writable.
enum PicStatus pic_normalized_score(double r_ave,
                                    double r_min_rand,
                                    double r_max_rand,
                                    double r_max_algo,
                                    double *score);

// Pearson correlation and two-sided p-value.
//
// # Safety
// `xs` and `ys` must hold `len` doubles; `r` and `p` writable.
enum PicStatus pic_pearson(const double *xs, const double *ys, size_t len, double *r, double *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIC_FFI_H */
