#ifndef DLNLAB_H
#define DLNLAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DlnStatus {
  DLN_STATUS_OK = 0,
  DLN_STATUS_NULL_POINTER = 1,
  DLN_STATUS_INVALID_ARGUMENT = 2,
  DLN_STATUS_PRECONDITION = 3,
  DLN_STATUS_NUMERICAL = 4,
  DLN_STATUS_DIVERGED = 5,
  DLN_STATUS_IO = 6,
  DLN_STATUS_BUFFER_TOO_SMALL = 7,
  DLN_STATUS_PANIC = 8,
} DlnStatus;

typedef enum DlnActivation {
  DLN_ACTIVATION_LINEAR = 0,
  DLN_ACTIVATION_RELU = 1,
} DlnActivation;

typedef struct DlnDataset DlnDataset;

typedef struct DlnNetwork DlnNetwork;

typedef struct DlnTrainResult DlnTrainResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t dln_last_error(char *buf, size_t len);

/**
 * Generate a near-orthonormal dataset with `k` classes of `n` samples in
 * dimension `d`. `noise` is the Frobenius norm of the perturbation.
 *
 * # Safety
 * `out` must be valid for a single pointer write.
 */
enum DlnStatus dln_dataset_generate(size_t d,
                                    size_t k,
                                    size_t n,
                                    uint64_t seed,
                                    double noise,
                                    struct DlnDataset **out);

/**
 * Measured near-orthonormality level of a dataset.
 *
 * # Safety
 * `ds` must be a live dataset handle; `theta` valid for a write.
 */
enum DlnStatus dln_dataset_theta(const struct DlnDataset *ds, double *theta);

/**
 * # Safety
 * `ds` must be null or a handle from [`dln_dataset_generate`] not yet freed.
 */
void dln_dataset_free(struct DlnDataset *ds);

/**
 * Orthogonal initialization with scale `xi`.
 *
 * # Safety
 * `out` must be valid for a single pointer write.
 */
enum DlnStatus dln_network_init(size_t layers,
                                size_t width,
                                size_t classes,
                                enum DlnActivation activation,
                                double xi,
                                uint64_t seed,
                                struct DlnNetwork **out);

/**
 * # Safety
 * `net` must be null or a handle from [`dln_network_init`] not yet freed.
 */
void dln_network_free(struct DlnNetwork *net);

/**
 * Full-batch gradient descent from `net` (left untouched) on `ds`.
 *
 * # Safety
 * `net` and `ds` must be live handles; `out` valid for a pointer write.
 */
enum DlnStatus dln_train(const struct DlnNetwork *net,
                         const struct DlnDataset *ds,
                         double eta,
                         double tol,
                         size_t max_iters,
                         struct DlnTrainResult **out);

/**
 * # Safety
 * `res` must be a live result handle.
 */
double dln_result_final_loss(const struct DlnTrainResult *res);

/**
 * # Safety
 * `res` must be a live result handle.
 */
size_t dln_result_iters(const struct DlnTrainResult *res);

/**
 * # Safety
 * `res` must be a live result handle.
 */
bool dln_result_converged(const struct DlnTrainResult *res);

/**
 * Per-layer compression and discrimination of the trained network on `ds`.
 * `compression` and `discrimination` must each hold `capacity` doubles;
 * `layers_out` receives the number of layers (L). If `capacity < L`,
 * nothing is written and `BufferTooSmall` is returned.
 *
 * # Safety
 * Pointers must be live handles / valid for `capacity` writes.
 */
enum DlnStatus dln_result_metrics(const struct DlnTrainResult *res,
                                  const struct DlnDataset *ds,
                                  double *compression,
                                  double *discrimination,
                                  size_t capacity,
                                  size_t *layers_out);

/**
 * # Safety
 * `res` must be null or a handle from [`dln_train`] not yet freed.
 */
void dln_result_free(struct DlnTrainResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DLNLAB_H */
