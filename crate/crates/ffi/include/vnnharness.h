#ifndef VNNHARNESS_H
#define VNNHARNESS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VnnError {
  VNN_ERROR_OK = 0,
  VNN_ERROR_NULL_POINTER = 1,
  VNN_ERROR_INVALID_UTF8 = 2,
  VNN_ERROR_PARSE = 3,
  VNN_ERROR_IO = 4,
  VNN_ERROR_NETWORK = 5,
  VNN_ERROR_DIMENSION = 6,
  VNN_ERROR_INVALID_ARGUMENT = 7,
  VNN_ERROR_PANIC = 8,
} VnnError;

typedef enum VnnCexMode {
  VNN_CEX_MODE_DISCARD_OUTPUTS = 0,
  VNN_CEX_MODE_PENALIZE_OUTPUTS = 1,
} VnnCexMode;

typedef enum VnnStatus {
  VNN_STATUS_HOLDS = 0,
  VNN_STATUS_VIOLATED = 1,
  VNN_STATUS_TIMEOUT = 2,
  VNN_STATUS_ERROR = 3,
  VNN_STATUS_UNKNOWN = 4,
} VnnStatus;

typedef enum VnnTruth {
  VNN_TRUTH_HOLDS = 0,
  VNN_TRUTH_VIOLATED = 1,
  VNN_TRUTH_UNDETERMINED = 2,
} VnnTruth;

typedef enum VnnVerdict {
  VNN_VERDICT_HOLDS = 0,
  VNN_VERDICT_VIOLATED = 1,
  VNN_VERDICT_UNKNOWN = 2,
} VnnVerdict;

/**
 * A loaded network.
 */
typedef struct VnnNetwork VnnNetwork;

/**
 * A parsed specification.
 */
typedef struct VnnSpec VnnSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call on this thread.
 */
const char *vnn_last_error_message(void);

/**
 * Parses VNN-LIB text. `*out` receives a handle on success.
 */
enum VnnError vnn_spec_parse(const char *text, struct VnnSpec **out);

/**
 * Loads a `.vnnlib` file. `*out` receives a handle on success.
 */
enum VnnError vnn_spec_load(const char *path, struct VnnSpec **out);

/**
 * Writes input, output and DNF case counts; any out pointer may be null.
 */
enum VnnError vnn_spec_counts(const struct VnnSpec *spec,
                              size_t *num_inputs,
                              size_t *num_outputs,
                              size_t *num_cases);

/**
 * # Safety
 * `spec` must be null or a handle from this library not yet freed.
 */
void vnn_spec_free(struct VnnSpec *spec);

/**
 * Loads an ONNX file. `*out` receives a handle on success.
 */
enum VnnError vnn_network_load(const char *path, struct VnnNetwork **out);

/**
 * Decodes an in-memory ONNX model.
 */
enum VnnError vnn_network_from_bytes(const uint8_t *data, size_t len, struct VnnNetwork **out);

/**
 * Writes flattened input and output sizes; either pointer may be null.
 */
enum VnnError vnn_network_counts(const struct VnnNetwork *net,
                                 size_t *num_inputs,
                                 size_t *num_outputs);

/**
 * Runs float32 inference on `x[0..nx]`, writing `y[0..ny]`.
 */
enum VnnError vnn_network_infer(const struct VnnNetwork *net,
                                const float *x,
                                size_t nx,
                                float *y,
                                size_t ny);

/**
 * # Safety
 * `net` must be null or a handle from this library not yet freed.
 */
void vnn_network_free(struct VnnNetwork *net);

/**
 * Checks witness text against `spec` and `net`. A negative `out_tol`
 * selects the default tolerance.
 */
enum VnnError vnn_cex_check(const struct VnnNetwork *net,
                            const struct VnnSpec *spec,
                            const char *witness,
                            enum VnnCexMode mode,
                            double out_tol,
                            bool *valid);

/**
 * Points for one result: 10, 0 or -150.
 */
int64_t vnn_score_instance(enum VnnStatus status, bool witness_valid, enum VnnTruth truth);

/**
 * Runs the baseline verifier. On a violated verdict the witness inputs are
 * written to `witness[0..n]` when `n` matches the input count.
 */
enum VnnError vnn_verify(const struct VnnNetwork *net,
                         const struct VnnSpec *spec,
                         double timeout_s,
                         uint64_t seed,
                         enum VnnVerdict *verdict,
                         double *witness,
                         size_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VNNHARNESS_H */
