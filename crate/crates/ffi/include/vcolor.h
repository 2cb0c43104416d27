/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef VCOLOR_H
#define VCOLOR_H

#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum VcStatus {
  VC_STATUS_OK = 0,
  VC_STATUS_NULL_POINTER = 1,
  VC_STATUS_INVALID_ARGUMENT = 2,
  VC_STATUS_DIMENSION_MISMATCH = 3,
  VC_STATUS_IO = 4,
  VC_STATUS_FORMAT = 5,
  VC_STATUS_COLORIZER = 6,
  VC_STATUS_PANIC = 7,
} VcStatus;

// A backward optical-flow field.
typedef struct VcFlow VcFlow;

// A CIELAB frame (L, A and B planes of equal size).
typedef struct VcLabFrame VcLabFrame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL. The pointer
// is valid until the next vcolor call on the same thread.
const char *vc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *vc_version(void);

// Convert a packed RGB image to a new Lab frame.
//
// # Safety
// `rgb` must point to `width * height * 3` bytes; `out` must be writable.
enum VcStatus vc_lab_from_rgb(const uint8_t *rgb,
                              size_t width,
                              size_t height,
                              struct VcLabFrame **out);

// Build a Lab frame from three planes of `width * height` floats.
//
// # Safety
// Each plane pointer must reference `width * height` floats; `out` must be writable.
enum VcStatus vc_lab_from_planes(const float *l,
                                 const float *a,
                                 const float *b,
                                 size_t width,
                                 size_t height,
                                 struct VcLabFrame **out);

// Write the frame as packed RGB into `rgb`, which holds `len` bytes.
//
// # Safety
// `frame` must be a live handle and `rgb` must point to `len` writable bytes.
enum VcStatus vc_lab_to_rgb(const struct VcLabFrame *frame, uint8_t *rgb, size_t len);

// Copy one channel (0 = L, 1 = A, 2 = B) into `dst`, which holds `len` floats.
//
// # Safety
// `frame` must be a live handle and `dst` must point to `len` writable floats.
enum VcStatus vc_lab_channel(const struct VcLabFrame *frame,
                             uint32_t channel,
                             float *dst,
                             size_t len);

// Report the frame size.
//
// # Safety
// `frame` must be a live handle; `width` and `height` must be writable.
enum VcStatus vc_lab_dims(const struct VcLabFrame *frame, size_t *width, size_t *height);

// # Safety
// `frame` must be NULL or a handle not yet freed.
void vc_lab_free(struct VcLabFrame *frame);

// Estimate the backward flow of `target` into `source` (luminance planes of
// `width * height` floats). Zero parameters select the defaults.
//
// # Safety
// Both planes must reference `width * height` floats; `out` must be writable.
enum VcStatus vc_flow_estimate(const float *target,
                               const float *source,
                               size_t width,
                               size_t height,
                               size_t pyramid_levels,
                               size_t window_radius,
                               size_t iterations,
                               struct VcFlow **out);

// Build a flow field from displacement planes.
//
// # Safety
// `u` and `v` must reference `width * height` floats; `out` must be writable.
enum VcStatus vc_flow_from_planes(const float *u,
                                  const float *v,
                                  size_t width,
                                  size_t height,
                                  struct VcFlow **out);

// Read a Middlebury `.flo` file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum VcStatus vc_flow_load(const char *path, struct VcFlow **out);

// Write a Middlebury `.flo` file.
//
// # Safety
// `flow` must be a live handle; `path` must be a NUL-terminated string.
enum VcStatus vc_flow_write(const struct VcFlow *flow, const char *path);

// Copy the displacement planes into `u` and `v`, each holding `len` floats.
//
// # Safety
// `flow` must be a live handle; `u` and `v` must point to `len` writable floats.
enum VcStatus vc_flow_planes(const struct VcFlow *flow, float *u, float *v, size_t len);

// # Safety
// `flow` must be NULL or a handle not yet freed.
void vc_flow_free(struct VcFlow *flow);

// One propagation step: warp `prev_final` along `flow`, flag pixels below
// `tau_db`, and fill them from `colorized` (whose L plane is the current
// luminance). Writes the new frame to `out` and, if non-NULL, the corrected
// pixel fraction to `corrected_fraction`.
//
// # Safety
// Handles must be live; `out` must be writable; `corrected_fraction` may be NULL.
enum VcStatus vc_propagate_step(const struct VcLabFrame *prev_final,
                                const struct VcLabFrame *colorized,
                                const struct VcFlow *flow,
                                double tau_db,
                                struct VcLabFrame **out,
                                double *corrected_fraction);

// PSNR in dB between two packed RGB images of equal size.
//
// # Safety
// Both images must reference `width * height * 3` bytes; `out` must be writable.
enum VcStatus vc_psnr(const uint8_t *result,
                      const uint8_t *reference,
                      size_t width,
                      size_t height,
                      double *out);

// Colorfulness of a packed RGB image.
//
// # Safety
// `rgb` must reference `width * height * 3` bytes; `out` must be writable.
enum VcStatus vc_colorfulness(const uint8_t *rgb, size_t width, size_t height, double *out);

// Color distribution consistency of `frames` consecutive packed RGB images
// stored back to back.
//
// # Safety
// `rgb` must reference `frames * width * height * 3` bytes; `out` must be writable.
enum VcStatus vc_cdc(const uint8_t *rgb, size_t frames, size_t width, size_t height, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VCOLOR_H */
