/* Generated by cbindgen; do not edit. */

#ifndef MOTIONFORGE_H
#define MOTIONFORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_ARGUMENT = 1,
  MF_STATUS_INVALID_UTF8 = 2,
  MF_STATUS_IO = 3,
  MF_STATUS_FORMAT = 4,
  MF_STATUS_SCHEMA = 5,
  MF_STATUS_VALIDATION = 6,
  MF_STATUS_DOMAIN = 7,
  MF_STATUS_DIMENSION_MISMATCH = 8,
  MF_STATUS_DEGENERATE = 9,
  MF_STATUS_BUFFER_TOO_SMALL = 10,
  MF_STATUS_PANIC = 11,
} MfStatus;

/**
 * Translated control signals.
 */
typedef struct MfBundle MfBundle;

/**
 * Parsed motion design.
 */
typedef struct MfDesign MfDesign;

/**
 * Depth, optional object mask and default intrinsics for one image.
 */
typedef struct MfScene MfScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mf_version(void);

/**
 * Message for the last failure on this thread, or NULL. Valid until the next
 * call into the library on this thread.
 */
const char *mf_last_error_message(void);

/**
 * Parse and validate a design document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MfStatus mf_design_parse(const char *json, struct MfDesign **out);

/**
 * # Safety
 * `design` must come from `mf_design_parse` (or be NULL) and not be used again.
 */
void mf_design_free(struct MfDesign *design);

/**
 * Frame count of a design, 0 for NULL.
 *
 * # Safety
 * `design` must be a live handle or NULL.
 */
uintptr_t mf_design_frame_count(const struct MfDesign *design);

/**
 * Build a scene from row-major buffers of `width * height` values.
 * `labels` may be NULL for a fully static scene.
 *
 * # Safety
 * `depth` (and `labels` when non-NULL) must point to `width * height`
 * readable values; `out` must be writable.
 */
enum MfStatus mf_scene_new(uintptr_t width,
                           uintptr_t height,
                           const double *depth,
                           const uint32_t *labels,
                           struct MfScene **out);

/**
 * Load a scene from a depth file (PFM or 16-bit PNG) and an optional mask
 * PNG. `depth_scale <= 0` reads the PNG scale from the `.scale` sidecar.
 *
 * # Safety
 * Paths must be NUL-terminated strings (`mask_path` may be NULL); `out`
 * must be writable.
 */
enum MfStatus mf_scene_load(const char *depth_path,
                            double depth_scale,
                            const char *mask_path,
                            struct MfScene **out);

/**
 * # Safety
 * `scene` must come from `mf_scene_new`/`mf_scene_load` (or be NULL) and not
 * be used again.
 */
void mf_scene_free(struct MfScene *scene);

/**
 * Translate a design over a scene.
 *
 * # Safety
 * `design` and `scene` must be live handles; `out` must be writable.
 */
enum MfStatus mf_translate(const struct MfDesign *design,
                           const struct MfScene *scene,
                           uintptr_t points,
                           uint64_t seed,
                           uintptr_t k,
                           struct MfBundle **out);

/**
 * # Safety
 * `bundle` must come from `mf_translate` (or be NULL) and not be used again.
 */
void mf_bundle_free(struct MfBundle *bundle);

/**
 * Frame count of a bundle, 0 for NULL.
 *
 * # Safety
 * `bundle` must be a live handle or NULL.
 */
uintptr_t mf_bundle_frame_count(const struct MfBundle *bundle);

/**
 * Number of point tracks (camera tracks first, then local tracks), 0 for NULL.
 *
 * # Safety
 * `bundle` must be a live handle or NULL.
 */
uintptr_t mf_bundle_track_count(const struct MfBundle *bundle);

/**
 * Copy track `index` as interleaved x, y pairs into `out_xy`, which holds
 * `capacity` doubles and needs `2 * frame_count`.
 *
 * # Safety
 * `bundle` must be a live handle; `out_xy` must hold `capacity` doubles.
 */
enum MfStatus mf_bundle_track_positions(const struct MfBundle *bundle,
                                        uintptr_t index,
                                        double *out_xy,
                                        uintptr_t capacity);

/**
 * Write the bundle directory (manifest, JSON files, box frames).
 *
 * # Safety
 * `bundle` must be a live handle; `dir` a NUL-terminated path.
 */
enum MfStatus mf_bundle_write(const struct MfBundle *bundle, const char *dir);

/**
 * Encode a trajectory of `len` interleaved x, y pairs into `k` coefficient
 * pairs (`2 * k` doubles in `out_coeffs`). Slot 0 holds the start point.
 *
 * # Safety
 * `xy` must hold `2 * len` doubles and `out_coeffs` `2 * k`.
 */
enum MfStatus mf_dct_encode(const double *xy, uintptr_t len, uintptr_t k, double *out_coeffs);

/**
 * Decode `k` coefficient pairs into `len` interleaved x, y pairs.
 *
 * # Safety
 * `coeffs` must hold `2 * k` doubles and `out_xy` `2 * len`.
 */
enum MfStatus mf_dct_decode(const double *coeffs, uintptr_t k, uintptr_t len, double *out_xy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOTIONFORGE_H */
