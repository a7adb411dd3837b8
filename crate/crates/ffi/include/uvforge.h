#ifndef UVFORGE_H
#define UVFORGE_H

/* Generated by cbindgen from uvforge-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Pipeline selector for `uvf_parameterize`.
 */
typedef enum UvfPipeline {
  UVF_PIPELINE_BASE = 0,
  UVF_PIPELINE_VISIBILITY = 1,
  UVF_PIPELINE_SEMANTIC = 2,
  UVF_PIPELINE_SEMANTIC_VISIBILITY = 3,
} UvfPipeline;

/**
 * Status codes mirroring the library's error classes.
 */
typedef enum UvfStatus {
  UVF_STATUS_OK = 0,
  UVF_STATUS_NULL_POINTER = 1,
  UVF_STATUS_INVALID_ARGUMENT = 2,
  UVF_STATUS_IO = 3,
  UVF_STATUS_PARSE = 4,
  UVF_STATUS_SEGMENTATION = 5,
  UVF_STATUS_TRAINING = 6,
  UVF_STATUS_EVALUATION = 7,
} UvfStatus;

/**
 * Opaque triangle mesh handle.
 */
typedef struct UvfMesh UvfMesh;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (UTF-8, NUL-terminated) into `buf`. Returns
 * the full message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (then only the
 * required length is returned).
 */
uintptr_t uvf_last_error_message(char *buf, uintptr_t len);

/**
 * Library version string; static storage, do not free.
 */
const char *uvf_version(void);

/**
 * Loads a triangle mesh from a Wavefront OBJ file.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be a valid
 * pointer to a mesh-handle slot.
 */
enum UvfStatus uvf_mesh_load(const char *path, struct UvfMesh **out);

/**
 * Builds a mesh from flat arrays: `vertices` is `3 * n_vertices` doubles
 * (xyz), `faces` is `3 * n_faces` vertex indices.
 *
 * # Safety
 * The arrays must match the stated lengths; `out` must be valid.
 */
enum UvfStatus uvf_mesh_from_arrays(const double *vertices,
                                    uintptr_t n_vertices,
                                    const uint32_t *faces,
                                    uintptr_t n_faces,
                                    struct UvfMesh **out);

/**
 * Releases a mesh handle. Null is ignored.
 *
 * # Safety
 * `mesh` must have been produced by this library and not yet freed.
 */
void uvf_mesh_free(struct UvfMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle (or null, which yields zero).
 */
uintptr_t uvf_mesh_vertex_count(const struct UvfMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle (or null, which yields zero).
 */
uintptr_t uvf_mesh_face_count(const struct UvfMesh *mesh);

/**
 * Normalizes the mesh in place (bounding-box center to the origin, unit
 * diagonal), as required before parameterization.
 *
 * # Safety
 * `mesh` must be a live handle.
 */
enum UvfStatus uvf_mesh_normalize(struct UvfMesh *mesh);

/**
 * Monte-Carlo ambient occlusion (1 = exposed). `out_values` receives one
 * double per vertex.
 *
 * # Safety
 * `mesh` must be live; `out_values` must hold `uvf_mesh_vertex_count` slots.
 */
enum UvfStatus uvf_ambient_occlusion(const struct UvfMesh *mesh,
                                     uint32_t samples,
                                     uint64_t seed,
                                     double *out_values);

/**
 * Shape diameter per face (median cone-ray thickness). `out_values` receives
 * one double per face.
 *
 * # Safety
 * `mesh` must be live; `out_values` must hold `uvf_mesh_face_count` slots.
 */
enum UvfStatus uvf_shape_diameter(const struct UvfMesh *mesh,
                                  uint32_t rays,
                                  uint64_t seed,
                                  double *out_values);

/**
 * Semantic partitioning into at most `k` parts. `out_labels` receives one
 * label per face; `out_num_labels` the final part count.
 *
 * # Safety
 * `mesh` must be live; `out_labels` must hold `uvf_mesh_face_count` slots;
 * `out_num_labels` must be valid.
 */
enum UvfStatus uvf_segment(const struct UvfMesh *mesh,
                           uint32_t k,
                           uint64_t seed,
                           uint32_t *out_labels,
                           uint32_t *out_num_labels);

/**
 * Learns a UV parameterization. The mesh is normalized internally; the
 * visibility pipelines compute ambient occlusion themselves and the semantic
 * pipelines run the segmentation stage with part count `k`. `out_uv`
 * receives `2 * n_vertices` doubles (u, v per vertex, in [0, 1]).
 *
 * # Safety
 * `mesh` must be live; `out_uv` must hold `2 * uvf_mesh_vertex_count` slots.
 */
enum UvfStatus uvf_parameterize(const struct UvfMesh *mesh,
                                enum UvfPipeline pipeline,
                                uint32_t iterations,
                                uint64_t seed,
                                double lambda_vis,
                                uint32_t k,
                                double *out_uv);

/**
 * Evaluates a UV map against the mesh and returns the metric report as a
 * JSON string (free with `uvf_string_free`). `uv` is `2 * n_vertices`
 * doubles; pass `ao_samples > 0` to include seam-exposure statistics.
 *
 * # Safety
 * `mesh` must be live; `uv` must hold `2 * uvf_mesh_vertex_count` doubles;
 * `out_json` must be valid.
 */
enum UvfStatus uvf_metrics_json(const struct UvfMesh *mesh,
                                const double *uv,
                                uint32_t ao_samples,
                                uint64_t seed,
                                double tau_scale,
                                char **out_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from a `uvf_*_json` call and not have been freed.
 */
void uvf_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* UVFORGE_H */
