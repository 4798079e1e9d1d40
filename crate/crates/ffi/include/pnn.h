#ifndef PNN_H
#define PNN_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define PNN_ACTIVATION_SIGMOID 0

#define PNN_ACTIVATION_RELU 1

#define PNN_ACTIVATION_TANH 2

#define PNN_MASK_OWN 0

#define PNN_MASK_SHARED 1

#define PNN_METHOD_A 0

#define PNN_METHOD_B 1

typedef enum PnnStatus {
  PNN_STATUS_OK = 0,
  PNN_STATUS_NULL_POINTER = 1,
  PNN_STATUS_INVALID_ARGUMENT = 2,
  PNN_STATUS_DIMENSION_MISMATCH = 3,
  PNN_STATUS_INVALID_ARCHITECTURE = 4,
  PNN_STATUS_FORMAT_ERROR = 5,
  PNN_STATUS_IO_ERROR = 6,
  PNN_STATUS_BUFFER_TOO_SMALL = 7,
  PNN_STATUS_PANIC = 8,
} PnnStatus;

// Opaque training/evaluation data.
typedef struct PnnDatasetHandle PnnDatasetHandle;

// Opaque PNN model.
typedef struct PnnModelHandle PnnModelHandle;

// Counts of the PNN's correct results by type.
typedef struct PnnTypeCounts {
  size_t total_correct;
  size_t type_i;
  size_t type_ii;
  size_t type_iii;
  size_t type_iv;
} PnnTypeCounts;

// Training settings; fill with [`pnn_train_config_default`] and override fields.
typedef struct PnnTrainConfig {
  // `PNN_METHOD_A` or `PNN_METHOD_B`.
  uint32_t method;
  size_t epochs_separate;
  size_t epochs_joint;
  double eta;
  double lambda;
  size_t batch_size;
  uint64_t seed;
  // Hidden-layer `PNN_ACTIVATION_*`.
  uint32_t activation;
  // Output-layer `PNN_ACTIVATION_*`.
  uint32_t head_activation;
} PnnTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread, or NULL if none. Valid until the next
// failing call on the same thread.
const char *pnn_last_error(void);

// Library version as a static NUL-terminated string.
const char *pnn_version(void);

// Builds a PNN from freshly initialized sub-networks, e.g. `"784,30,20,10+784,32,10"`.
//
// # Safety
// `arch` must be a NUL-terminated string and `out` a valid pointer.
enum PnnStatus pnn_model_init(const char *arch,
                              uint32_t activation_code,
                              uint64_t seed,
                              struct PnnModelHandle **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum PnnStatus pnn_model_load(const char *path, struct PnnModelHandle **out);

// # Safety
// `model` must come from this library and `path` be a NUL-terminated string.
enum PnnStatus pnn_model_save(const struct PnnModelHandle *model, const char *path);

// Releases a model; NULL is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void pnn_model_free(struct PnnModelHandle *model);

// # Safety
// All pointers must be valid; any output pointer may be NULL to skip it.
enum PnnStatus pnn_model_shape(const struct PnnModelHandle *model,
                               size_t *subnet_count,
                               size_t *input_width,
                               size_t *output_width);

// Output activations of the whole PNN.
//
// # Safety
// `input` must hold `input_len` values and `output` room for `output_len`.
enum PnnStatus pnn_model_forward(const struct PnnModelHandle *model,
                                 const double *input,
                                 size_t input_len,
                                 double *output,
                                 size_t output_len);

// Output activations of sub-network `subnet` alone (`PNN_MASK_OWN` or `PNN_MASK_SHARED` bias).
//
// # Safety
// As [`pnn_model_forward`].
enum PnnStatus pnn_model_forward_masked(const struct PnnModelHandle *model,
                                        const double *input,
                                        size_t input_len,
                                        size_t subnet,
                                        uint32_t mode,
                                        double *output,
                                        size_t output_len);

// Predicted class of the whole PNN.
//
// # Safety
// `input` must hold `input_len` values and `class_out` be valid.
enum PnnStatus pnn_model_classify(const struct PnnModelHandle *model,
                                  const double *input,
                                  size_t input_len,
                                  size_t *class_out);

// Loads MNIST from `dir`; `train_cap == 0` keeps the whole training split.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` valid.
enum PnnStatus pnn_dataset_load_mnist(const char *dir,
                                      size_t train_cap,
                                      struct PnnDatasetHandle **out);

// Builds a dataset from row-major pixel buffers (`n × width`, values in [0,1]) and labels (0–9).
//
// # Safety
// Buffers must hold the stated number of values; `out` must be valid.
enum PnnStatus pnn_dataset_from_buffers(size_t width,
                                        const double *train_pixels,
                                        const uint8_t *train_labels,
                                        size_t train_count,
                                        const double *eval_pixels,
                                        const uint8_t *eval_labels,
                                        size_t eval_count,
                                        struct PnnDatasetHandle **out);

// # Safety
// `data` must be valid; output pointers may be NULL to skip them.
enum PnnStatus pnn_dataset_sizes(const struct PnnDatasetHandle *data,
                                 size_t *train_count,
                                 size_t *eval_count);

// Releases a dataset; NULL is ignored.
//
// # Safety
// `data` must come from this library and not be used afterwards.
void pnn_dataset_free(struct PnnDatasetHandle *data);

// Accuracy of the whole PNN and of every sub-network (own-bias `alpha`, shared-bias
// `alpha_prime`) on the evaluation split. The arrays need `capacity >= subnet count`.
//
// # Safety
// All pointers must be valid for the stated sizes.
enum PnnStatus pnn_evaluate(const struct PnnModelHandle *model,
                            const struct PnnDatasetHandle *data,
                            double *alpha_para,
                            double *alpha,
                            double *alpha_prime,
                            size_t capacity);

// Type I–IV counts of the PNN's correct evaluation results (2 sub-networks only).
//
// # Safety
// All pointers must be valid.
enum PnnStatus pnn_taxonomy(const struct PnnModelHandle *model,
                            const struct PnnDatasetHandle *data,
                            uint32_t mode,
                            struct PnnTypeCounts *counts);

// Default settings: method A, 60 + 40 epochs, eta 0.1, lambda 5, batch 10, seed 1, sigmoid.
//
// # Safety
// `out` must be valid.
enum PnnStatus pnn_train_config_default(struct PnnTrainConfig *out);

// Trains a PNN and returns the model from the epoch with the best whole-PNN accuracy.
//
// # Safety
// `arch` must be a NUL-terminated string; other pointers must be valid.
enum PnnStatus pnn_train(const char *arch,
                         const struct PnnTrainConfig *config,
                         const struct PnnDatasetHandle *data,
                         double *best_alpha_para,
                         struct PnnModelHandle **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PNN_H */
