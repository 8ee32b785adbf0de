#ifndef MSC_H
#define MSC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The non-zero values match the `msc` exit codes where they
 * overlap.
 */
typedef enum MscStatus {
  MSC_STATUS_OK = 0,
  /**
   * Bad argument, configuration or modality name.
   */
  MSC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Shape mismatch, malformed or unreadable file.
   */
  MSC_STATUS_DATA_ERROR = 3,
  /**
   * Numerical failure or non-convergence.
   */
  MSC_STATUS_NUMERICAL_ERROR = 4,
  /**
   * A required pointer was null.
   */
  MSC_STATUS_NULL_POINTER = 5,
  /**
   * Rust panic caught at the boundary.
   */
  MSC_STATUS_PANIC = 6,
} MscStatus;

/**
 * A single-modality dictionary with its default coder.
 */
typedef struct MscDictionary MscDictionary;

/**
 * A joint dictionary over two or more modalities.
 */
typedef struct MscJointModel MscJointModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *msc_last_error_message(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *msc_version(void);

/**
 * Trains an ℓ1 dictionary of `num_atoms` atoms with online learning.
 *
 * `data` is `rows x cols`, column-major.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles and `out` to writable storage
 * for one handle.
 */
enum MscStatus msc_dictionary_train_l1(const double *data,
                                       size_t rows,
                                       size_t cols,
                                       size_t num_atoms,
                                       double lambda,
                                       size_t epochs,
                                       uint64_t seed,
                                       struct MscDictionary **out);

/**
 * Trains an ℓ0 dictionary with K-SVD, `sparsity` atoms per code.
 *
 * # Safety
 * As for [`msc_dictionary_train_l1`].
 */
enum MscStatus msc_dictionary_train_l0(const double *data,
                                       size_t rows,
                                       size_t cols,
                                       size_t num_atoms,
                                       size_t sparsity,
                                       size_t epochs,
                                       uint64_t seed,
                                       struct MscDictionary **out);

/**
 * Loads `<stem>.msc` / `<stem>.json`.
 *
 * # Safety
 * `stem` must be a NUL-terminated string, `out` writable.
 */
enum MscStatus msc_dictionary_load(const char *stem, struct MscDictionary **out);

/**
 * # Safety
 * `dict` must be a live handle, `stem` a NUL-terminated string.
 */
enum MscStatus msc_dictionary_save(const struct MscDictionary *dict, const char *stem);

/**
 * Releases a handle. Null is a no-op.
 *
 * # Safety
 * `dict` must come from this library and not be used afterwards.
 */
void msc_dictionary_free(struct MscDictionary *dict);

/**
 * Atom dimension, or 0 for a null handle.
 *
 * # Safety
 * `dict` must be null or a live handle.
 */
size_t msc_dictionary_atom_dim(const struct MscDictionary *dict);

/**
 * Number of atoms, or 0 for a null handle.
 *
 * # Safety
 * `dict` must be null or a live handle.
 */
size_t msc_dictionary_num_atoms(const struct MscDictionary *dict);

/**
 * Copies the atoms, column-major, into `out` (`atom_dim * num_atoms`).
 *
 * # Safety
 * `out` must point to `out_len` writable doubles.
 */
enum MscStatus msc_dictionary_atoms(const struct MscDictionary *dict, double *out, size_t out_len);

/**
 * LASSO codes of each column of `x` (`rows x cols`), written to `out` as a
 * `num_atoms x cols` column-major matrix.
 *
 * # Safety
 * `x` must point to `rows * cols` doubles, `out` to `out_len` writable ones.
 */
enum MscStatus msc_encode_l1(const struct MscDictionary *dict,
                             const double *x,
                             size_t rows,
                             size_t cols,
                             double lambda,
                             double *out,
                             size_t out_len);

/**
 * OMP codes with at most `sparsity` non-zeros per column. Layout as for
 * [`msc_encode_l1`].
 *
 * # Safety
 * As for [`msc_encode_l1`].
 */
enum MscStatus msc_encode_l0(const struct MscDictionary *dict,
                             const double *x,
                             size_t rows,
                             size_t cols,
                             size_t sparsity,
                             double *out,
                             size_t out_len);

/**
 * Codes with the solver the dictionary was trained or saved with.
 *
 * # Safety
 * As for [`msc_encode_l1`].
 */
enum MscStatus msc_encode(const struct MscDictionary *dict,
                          const double *x,
                          size_t rows,
                          size_t cols,
                          double *out,
                          size_t out_len);

/**
 * Trains a joint ℓ1 dictionary on `num_modalities` paired datasets.
 *
 * Modality `m` is named `names[m]` and has `dims[m] x cols` values at
 * `data[m]`. λ′ is `lambda_joint`; λ″ is derived from it.
 *
 * # Safety
 * `names`, `data` and `dims` must each hold `num_modalities` valid entries.
 */
enum MscStatus msc_joint_train(const char *const *names,
                               const double *const *data,
                               const size_t *dims,
                               size_t num_modalities,
                               size_t cols,
                               size_t num_atoms,
                               double lambda_joint,
                               size_t epochs,
                               uint64_t seed,
                               struct MscJointModel **out);

/**
 * # Safety
 * `stem` must be a NUL-terminated string, `out` writable.
 */
enum MscStatus msc_joint_load(const char *stem, struct MscJointModel **out);

/**
 * # Safety
 * `model` must be a live handle, `stem` a NUL-terminated string.
 */
enum MscStatus msc_joint_save(const struct MscJointModel *model, const char *stem);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void msc_joint_free(struct MscJointModel *model);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
size_t msc_joint_num_atoms(const struct MscJointModel *model);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
size_t msc_joint_num_modalities(const struct MscJointModel *model);

/**
 * Dimension of modality `index` (in training order), or 0 when out of range.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t msc_joint_modality_dim(const struct MscJointModel *model, size_t index);

/**
 * Joint codes of paired examples. `data[m]` holds `dim_m x cols` values of
 * modality `m` in training order; `out` receives `num_atoms x cols`.
 *
 * # Safety
 * `data` must hold one valid pointer per modality of the model.
 */
enum MscStatus msc_joint_encode(const struct MscJointModel *model,
                                const double *const *data,
                                size_t cols,
                                double *out,
                                size_t out_len);

/**
 * Cross-modal codes of single-modality examples, using λ″.
 *
 * # Safety
 * `modality` must be a NUL-terminated string, `x` must point to
 * `rows * cols` doubles.
 */
enum MscStatus msc_joint_cross_encode(const struct MscJointModel *model,
                                      const char *modality,
                                      const double *x,
                                      size_t rows,
                                      size_t cols,
                                      double *out,
                                      size_t out_len);

/**
 * Estimates modality `to` from examples of modality `from`; `out` receives
 * `dim_to x cols`.
 *
 * # Safety
 * As for [`msc_joint_cross_encode`], with `to` a NUL-terminated string.
 */
enum MscStatus msc_joint_cross_reconstruct(const struct MscJointModel *model,
                                           const char *from,
                                           const char *to,
                                           const double *x,
                                           size_t rows,
                                           size_t cols,
                                           double *out,
                                           size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSC_H */
