#ifndef SICNET_H
#define SICNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SicStatus {
  SIC_STATUS_OK = 0,
  SIC_STATUS_NULL_POINTER = 1,
  SIC_STATUS_INVALID_ARGUMENT = 2,
  SIC_STATUS_SHAPE = 3,
  SIC_STATUS_FORMAT = 4,
  SIC_STATUS_IO = 5,
  SIC_STATUS_NUMERIC = 6,
  SIC_STATUS_DIVERGENCE = 7,
  SIC_STATUS_UNSUPPORTED = 8,
  SIC_STATUS_CALIBRATION = 9,
  SIC_STATUS_CONFIG = 10,
  SIC_STATUS_BUFFER_TOO_SMALL = 11,
  SIC_STATUS_PANIC = 12,
} SicStatus;

// Opaque dataset handle.
typedef struct SicDataset SicDataset;

// Opaque model handle.
typedef struct SicModel SicModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length
// including the terminator, 0 when there is no message.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t sic_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *sic_version(void);

// Generate a dataset. `system`: 0 Hammerstein, 1 Wiener. `taxonomy`:
// 0 invNL+invSI, 1 invNL+varSI, 2 varNL+varSI.
//
// # Safety
// `out` must be a valid pointer; on success it receives a new handle.
enum SicStatus sic_dataset_generate(uint8_t system,
                                    uint8_t taxonomy,
                                    double si_sdr0_db,
                                    uint64_t master_seed,
                                    uint64_t system_seed,
                                    struct SicDataset **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SicStatus sic_dataset_read(const char *path, struct SicDataset **out);

// Write the dataset and its sidecar description.
//
// # Safety
// `ds` must be a live handle and `path` a NUL-terminated string.
enum SicStatus sic_dataset_write(const struct SicDataset *ds, const char *path);

// # Safety
// `ds` must be a live handle and the out pointers valid.
enum SicStatus sic_dataset_shape(const struct SicDataset *ds, size_t *records, size_t *samples);

// Copy the input (`output == 0`) or output signal of one record into
// `buf` as `samples` interleaved pairs, `2 * samples` doubles.
//
// # Safety
// `ds` must be a live handle and `buf` hold `capacity` doubles.
enum SicStatus sic_dataset_copy_signal(const struct SicDataset *ds,
                                       size_t record,
                                       int32_t output,
                                       double *buf,
                                       size_t capacity);

// # Safety
// `ds` must be null or a handle not yet freed.
void sic_dataset_free(struct SicDataset *ds);

// Build a neural model. `kind`: 0 global, 1 adaptive, 2 parallel.
//
// # Safety
// `out` must be a valid pointer.
enum SicStatus sic_model_build(uint8_t kind,
                               size_t nonlinear_order,
                               size_t linear_order,
                               size_t num_signals,
                               uint64_t init_seed,
                               struct SicModel **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SicStatus sic_model_read(const char *path, struct SicModel **out);

// Write the snapshot and its parameter manifest.
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum SicStatus sic_model_write(const struct SicModel *model, const char *path);

// Complex weight count; `role` -1 for all, 0 shared, 1 adaptive.
//
// # Safety
// `model` must be a live handle and `out` valid.
enum SicStatus sic_model_weight_count(const struct SicModel *model, int32_t role, size_t *out);

// Full-batch training; `final_db` receives the last training MSE in dB.
//
// # Safety
// Handles must be live and `final_db` valid.
enum SicStatus sic_model_fit(struct SicModel *model,
                             const struct SicDataset *ds,
                             size_t epochs,
                             double lr,
                             size_t log_every,
                             double *final_db);

// Test-time adaptation with shared weights frozen; `final_db` receives
// the last test MSE in dB.
//
// # Safety
// Handles must be live and `final_db` valid.
enum SicStatus sic_model_adapt(struct SicModel *model,
                               const struct SicDataset *ds,
                               size_t epochs,
                               double lr,
                               size_t log_every,
                               double *final_db);

// # Safety
// Handles must be live and `out_db` valid.
enum SicStatus sic_model_evaluate(const struct SicModel *model,
                                  const struct SicDataset *ds,
                                  double *out_db);

// # Safety
// `model` must be null or a handle not yet freed.
void sic_model_free(struct SicModel *model);

// Least-squares memory polynomial; `order` 1 gives the linear FIR.
//
// # Safety
// `ds` must be a live handle and `out_db` valid.
enum SicStatus sic_memory_poly_fit(const struct SicDataset *ds,
                                   size_t order,
                                   size_t memory,
                                   double *out_db);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SICNET_H */
