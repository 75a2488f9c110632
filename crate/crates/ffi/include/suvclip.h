#ifndef SUVCLIP_H
#define SUVCLIP_H

#pragma once

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SuvStatus {
  SUV_STATUS_OK = 0,
  SUV_STATUS_NULL_POINTER = 1,
  SUV_STATUS_INVALID_ARGUMENT = 2,
  SUV_STATUS_GEOMETRY = 3,
  SUV_STATUS_IO = 4,
  SUV_STATUS_FORMAT = 5,
  SUV_STATUS_PANIC = 6,
} SuvStatus;

// Opaque binary mask.
typedef struct SuvMask SuvMask;

// Opaque intensity volume.
typedef struct SuvVolume SuvVolume;

typedef struct SuvMetrics {
  double dsc;
  double nsd;
  double nsd_tau_mm;
  double hd95_mm;
  bool empty_pred;
  bool empty_gt;
} SuvMetrics;

typedef struct SuvWilcoxon {
  double statistic;
  double w_plus;
  double w_minus;
  size_t n;
  double p_value;
  bool exact;
  bool degenerate;
} SuvWilcoxon;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread (empty after success).
// The pointer stays valid until the next suvclip call on this thread.
const char *suv_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *suv_version(void);

// Reads a NIfTI-1 volume (`.nii` or `.nii.gz`).
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SuvStatus suv_volume_read(const char *path, struct SuvVolume **out);

// Builds an axis-aligned volume from x-fastest `data` of length
// `dims[0] * dims[1] * dims[2]`.
//
// # Safety
// `dims`, `spacing` and `origin` must point to 3 elements, `data` to
// `len` elements, and `out` must be valid.
enum SuvStatus suv_volume_from_data(const size_t *dims,
                                    const double *spacing,
                                    const double *origin,
                                    const double *data,
                                    size_t len,
                                    struct SuvVolume **out);

// Writes `vol` as float32 NIfTI-1; gzip when the path ends in `.gz`.
//
// # Safety
// `vol` must be a live handle and `path` a NUL-terminated string.
enum SuvStatus suv_volume_write(const struct SuvVolume *vol, const char *path);

// Copies the grid dimensions into `dims[0..3]`.
//
// # Safety
// `vol` must be a live handle and `dims` must have room for 3 elements.
enum SuvStatus suv_volume_dims(const struct SuvVolume *vol, size_t *dims);

// Number of voxels, or 0 for NULL.
//
// # Safety
// `vol` must be NULL or a live handle.
size_t suv_volume_len(const struct SuvVolume *vol);

// Borrowed pointer to the x-fastest voxel values, valid until the handle
// is freed. NULL for a NULL handle.
//
// # Safety
// `vol` must be NULL or a live handle.
const double *suv_volume_data(const struct SuvVolume *vol);

// # Safety
// `vol` must be NULL or a handle not yet freed.
void suv_volume_free(struct SuvVolume *vol);

// Reads a NIfTI-1 mask; every voxel must be 0 or 1.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SuvStatus suv_mask_read(const char *path, struct SuvMask **out);

// Builds an axis-aligned mask from x-fastest 0/1 `data`.
//
// # Safety
// As for [`suv_volume_from_data`].
enum SuvStatus suv_mask_from_data(const size_t *dims,
                                  const double *spacing,
                                  const double *origin,
                                  const uint8_t *data,
                                  size_t len,
                                  struct SuvMask **out);

// Writes `mask` as uint8 NIfTI-1.
//
// # Safety
// `mask` must be a live handle and `path` a NUL-terminated string.
enum SuvStatus suv_mask_write(const struct SuvMask *mask, const char *path);

// Copies the grid dimensions into `dims[0..3]`.
//
// # Safety
// `mask` must be a live handle and `dims` must have room for 3 elements.
enum SuvStatus suv_mask_dims(const struct SuvMask *mask, size_t *dims);

// Number of foreground voxels, or 0 for NULL.
//
// # Safety
// `mask` must be NULL or a live handle.
size_t suv_mask_count(const struct SuvMask *mask);

// Borrowed pointer to the x-fastest 0/1 values.
//
// # Safety
// `mask` must be NULL or a live handle.
const uint8_t *suv_mask_data(const struct SuvMask *mask);

// # Safety
// `mask` must be NULL or a handle not yet freed.
void suv_mask_free(struct SuvMask *mask);

// DSC, NSD at `tau_mm` and HD-95 between two masks on the same grid.
//
// # Safety
// `pred` and `gt` must be live handles and `out` valid.
enum SuvStatus suv_metrics_evaluate(const struct SuvMask *pred,
                                    const struct SuvMask *gt,
                                    double tau_mm,
                                    struct SuvMetrics *out);

// Two-sided paired Wilcoxon signed-rank test on `a[i] - b[i]`.
//
// # Safety
// `a` and `b` must point to `n` elements and `out` must be valid.
enum SuvStatus suv_wilcoxon(const double *a, const double *b, size_t n, struct SuvWilcoxon *out);

// Absolute threshold `p / 100 * suvmax`.
double suv_compute_threshold(double p, double suvmax);

// Voxels inside `scope` with uptake at or above `threshold`.
//
// # Safety
// `pet` and `scope` must be live handles and `out` valid.
enum SuvStatus suv_threshold_segment(const struct SuvVolume *pet,
                                     const struct SuvMask *scope,
                                     double threshold,
                                     struct SuvMask **out);

// New volume with intensities clamped to `[min_t, max_t]`.
//
// # Safety
// `vol` must be a live handle and `out` valid.
enum SuvStatus suv_clip(const struct SuvVolume *vol,
                        double min_t,
                        double max_t,
                        struct SuvVolume **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUVCLIP_H */
