//! C ABI over the uvforge library: opaque mesh handles, status codes and
//! flat-buffer outputs so other languages can bind without Rust types.
//!
//! Conventions:
//! - Every fallible call returns a [`UvfStatus`]; `UVF_STATUS_OK` is zero.
//! - On failure, `uvf_last_error_message` returns a UTF-8 description of the
//!   most recent error on the calling thread.
//! - Output buffers are caller-allocated; sizes come from the mesh accessors.
//! - `UvfMesh` handles own their data and must be released with
//!   `uvf_mesh_free`. Strings returned by `uvf_*_json` functions must be
//!   released with `uvf_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

use uvforge::label::Labeling;
use uvforge::mesh::{face_adjacency, normalize_mesh, Mesh};
use uvforge::seg::{segment_mesh, SegmentConfig};
use uvforge::spatial::{ambient_occlusion, shape_diameter, Bvh, FieldConfig, ScalarField};
use uvforge::train::{
    train_base, train_semantic, train_visibility, Pipeline, TrainConfig,
};
use uvforge::Vec3;

/// Status codes mirroring the library's error classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UvfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Segmentation = 5,
    Training = 6,
    Evaluation = 7,
}

/// Pipeline selector for `uvf_parameterize`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UvfPipeline {
    Base = 0,
    Visibility = 1,
    Semantic = 2,
    SemanticVisibility = 3,
}

/// Opaque triangle mesh handle.
pub struct UvfMesh {
    mesh: Mesh,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

fn status_of(err: &uvforge::Error) -> UvfStatus {
    use uvforge::Error::*;
    set_error(&err.to_string());
    match err {
        Io { .. } => UvfStatus::Io,
        ObjParse { .. } | InvalidMesh(_) | Json(_) => UvfStatus::Parse,
        EmptyLabel(_) | Gmm(_) | Segmentation(_) => UvfStatus::Segmentation,
        TrainingAborted { .. } => UvfStatus::Training,
        Evaluation(_) => UvfStatus::Evaluation,
        InvalidArgument(_) => UvfStatus::InvalidArgument,
    }
}

/// Copies the last error message (UTF-8, NUL-terminated) into `buf`. Returns
/// the full message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (then only the
/// required length is returned).
#[no_mangle]
pub unsafe extern "C" fn uvf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Always terminate.
            *buf.add(n.min(len - 1).max(0)) = 0;
        }
        bytes.len() - 1
    })
}

/// Library version string; static storage, do not free.
#[no_mangle]
pub extern "C" fn uvf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a triangle mesh from a Wavefront OBJ file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be a valid
/// pointer to a mesh-handle slot.
#[no_mangle]
pub unsafe extern "C" fn uvf_mesh_load(
    path: *const c_char,
    out: *mut *mut UvfMesh,
) -> UvfStatus {
    if path.is_null() || out.is_null() {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => PathBuf::from(s),
        Err(_) => {
            set_error("path is not valid UTF-8");
            return UvfStatus::InvalidArgument;
        }
    };
    match uvforge::obj::load_obj(&path) {
        Ok(loaded) => {
            *out = Box::into_raw(Box::new(UvfMesh { mesh: loaded.mesh }));
            UvfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Builds a mesh from flat arrays: `vertices` is `3 * n_vertices` doubles
/// (xyz), `faces` is `3 * n_faces` vertex indices.
///
/// # Safety
/// The arrays must match the stated lengths; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uvf_mesh_from_arrays(
    vertices: *const f64,
    n_vertices: usize,
    faces: *const u32,
    n_faces: usize,
    out: *mut *mut UvfMesh,
) -> UvfStatus {
    if vertices.is_null() || faces.is_null() || out.is_null() {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    }
    let vs = std::slice::from_raw_parts(vertices, n_vertices * 3);
    let fs = std::slice::from_raw_parts(faces, n_faces * 3);
    let verts: Vec<Vec3> = vs
        .chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect();
    let tris: Vec<[u32; 3]> = fs.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    match Mesh::new(verts, tris) {
        Ok(mesh) => {
            *out = Box::into_raw(Box::new(UvfMesh { mesh }));
            UvfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a mesh handle. Null is ignored.
///
/// # Safety
/// `mesh` must have been produced by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uvf_mesh_free(mesh: *mut UvfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle (or null, which yields zero).
#[no_mangle]
pub unsafe extern "C" fn uvf_mesh_vertex_count(mesh: *const UvfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.vertex_count())
}

/// # Safety
/// `mesh` must be a live handle (or null, which yields zero).
#[no_mangle]
pub unsafe extern "C" fn uvf_mesh_face_count(mesh: *const UvfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.face_count())
}

/// Normalizes the mesh in place (bounding-box center to the origin, unit
/// diagonal), as required before parameterization.
///
/// # Safety
/// `mesh` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uvf_mesh_normalize(mesh: *mut UvfMesh) -> UvfStatus {
    let Some(m) = mesh.as_mut() else {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    };
    match normalize_mesh(&m.mesh) {
        Ok(n) => {
            m.mesh = n;
            UvfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Monte-Carlo ambient occlusion (1 = exposed). `out_values` receives one
/// double per vertex.
///
/// # Safety
/// `mesh` must be live; `out_values` must hold `uvf_mesh_vertex_count` slots.
#[no_mangle]
pub unsafe extern "C" fn uvf_ambient_occlusion(
    mesh: *const UvfMesh,
    samples: u32,
    seed: u64,
    out_values: *mut f64,
) -> UvfStatus {
    let Some(m) = mesh.as_ref() else {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    };
    if out_values.is_null() {
        set_error("null output buffer");
        return UvfStatus::NullPointer;
    }
    let config = FieldConfig {
        ao_samples: samples.max(1),
        rng_seed: seed,
        ..FieldConfig::default()
    };
    let bvh = Bvh::build(&m.mesh);
    let field = ambient_occlusion(&m.mesh, &bvh, &config);
    std::ptr::copy_nonoverlapping(field.values.as_ptr(), out_values, field.values.len());
    UvfStatus::Ok
}

/// Shape diameter per face (median cone-ray thickness). `out_values` receives
/// one double per face.
///
/// # Safety
/// `mesh` must be live; `out_values` must hold `uvf_mesh_face_count` slots.
#[no_mangle]
pub unsafe extern "C" fn uvf_shape_diameter(
    mesh: *const UvfMesh,
    rays: u32,
    seed: u64,
    out_values: *mut f64,
) -> UvfStatus {
    let Some(m) = mesh.as_ref() else {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    };
    if out_values.is_null() {
        set_error("null output buffer");
        return UvfStatus::NullPointer;
    }
    let config = FieldConfig {
        shdf_rays: rays.max(1),
        rng_seed: seed,
        ..FieldConfig::default()
    };
    let bvh = Bvh::build(&m.mesh);
    let field = shape_diameter(&m.mesh, &bvh, &config);
    std::ptr::copy_nonoverlapping(field.values.as_ptr(), out_values, field.values.len());
    UvfStatus::Ok
}

/// Semantic partitioning into at most `k` parts. `out_labels` receives one
/// label per face; `out_num_labels` the final part count.
///
/// # Safety
/// `mesh` must be live; `out_labels` must hold `uvf_mesh_face_count` slots;
/// `out_num_labels` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uvf_segment(
    mesh: *const UvfMesh,
    k: u32,
    seed: u64,
    out_labels: *mut u32,
    out_num_labels: *mut u32,
) -> UvfStatus {
    let Some(m) = mesh.as_ref() else {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    };
    if out_labels.is_null() || out_num_labels.is_null() {
        set_error("null output buffer");
        return UvfStatus::NullPointer;
    }
    let config = SegmentConfig {
        seed,
        ..SegmentConfig::default()
    };
    match segment_mesh(&m.mesh, k as usize, &config) {
        Ok(result) => {
            std::ptr::copy_nonoverlapping(
                result.labeling.labels.as_ptr(),
                out_labels,
                result.labeling.labels.len(),
            );
            *out_num_labels = result.labeling.num_labels;
            UvfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Learns a UV parameterization. The mesh is normalized internally; the
/// visibility pipelines compute ambient occlusion themselves and the semantic
/// pipelines run the segmentation stage with part count `k`. `out_uv`
/// receives `2 * n_vertices` doubles (u, v per vertex, in [0, 1]).
///
/// # Safety
/// `mesh` must be live; `out_uv` must hold `2 * uvf_mesh_vertex_count` slots.
#[no_mangle]
pub unsafe extern "C" fn uvf_parameterize(
    mesh: *const UvfMesh,
    pipeline: UvfPipeline,
    iterations: u32,
    seed: u64,
    lambda_vis: f64,
    k: u32,
    out_uv: *mut f64,
) -> UvfStatus {
    let Some(m) = mesh.as_ref() else {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    };
    if out_uv.is_null() {
        set_error("null output buffer");
        return UvfStatus::NullPointer;
    }
    let normalized = match normalize_mesh(&m.mesh) {
        Ok(n) => n,
        Err(e) => return status_of(&e),
    };
    let mut config = TrainConfig {
        iterations: iterations.max(1) as usize,
        seed,
        ..TrainConfig::default()
    };
    config.weights.lambda_vis = lambda_vis;

    let compute_ao = || -> ScalarField {
        let fields = FieldConfig {
            rng_seed: seed,
            ..FieldConfig::default()
        };
        let bvh = Bvh::build(&normalized);
        ambient_occlusion(&normalized, &bvh, &fields)
    };
    let run_segmentation = || -> uvforge::Result<Labeling> {
        let config = SegmentConfig {
            seed,
            ..SegmentConfig::default()
        };
        Ok(segment_mesh(&normalized, k.max(1) as usize, &config)?.labeling)
    };

    let pipeline = match pipeline {
        UvfPipeline::Base => Pipeline::Base,
        UvfPipeline::Visibility => Pipeline::Visibility,
        UvfPipeline::Semantic => Pipeline::Semantic,
        UvfPipeline::SemanticVisibility => Pipeline::SemanticVisibility,
    };
    let uv: Vec<[f64; 2]> = match pipeline {
        Pipeline::Base => match train_base(&normalized, &config) {
            Ok(r) => uvforge::train::normalize_island(&r.uv),
            Err(e) => return status_of(&e),
        },
        Pipeline::Visibility => {
            let ao = compute_ao();
            match train_visibility(&normalized, &ao, &config) {
                Ok(r) => uvforge::train::normalize_island(&r.uv),
                Err(e) => return status_of(&e),
            }
        }
        Pipeline::Semantic | Pipeline::SemanticVisibility => {
            let labeling = match run_segmentation() {
                Ok(l) => l,
                Err(e) => return status_of(&e),
            };
            let ao = if pipeline == Pipeline::SemanticVisibility {
                Some(compute_ao())
            } else {
                None
            };
            match train_semantic(&normalized, &labeling, &config, ao.as_ref(), 0.05) {
                Ok(r) => r.final_uv,
                Err(e) => return status_of(&e),
            }
        }
    };
    for (i, p) in uv.iter().enumerate() {
        *out_uv.add(2 * i) = p[0];
        *out_uv.add(2 * i + 1) = p[1];
    }
    UvfStatus::Ok
}

/// Evaluates a UV map against the mesh and returns the metric report as a
/// JSON string (free with `uvf_string_free`). `uv` is `2 * n_vertices`
/// doubles; pass `ao_samples > 0` to include seam-exposure statistics.
///
/// # Safety
/// `mesh` must be live; `uv` must hold `2 * uvf_mesh_vertex_count` doubles;
/// `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uvf_metrics_json(
    mesh: *const UvfMesh,
    uv: *const f64,
    ao_samples: u32,
    seed: u64,
    tau_scale: f64,
    out_json: *mut *mut c_char,
) -> UvfStatus {
    let Some(m) = mesh.as_ref() else {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    };
    if uv.is_null() || out_json.is_null() {
        set_error("null pointer");
        return UvfStatus::NullPointer;
    }
    let n = m.mesh.vertex_count();
    let flat = std::slice::from_raw_parts(uv, 2 * n);
    let uv: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let adjacency = face_adjacency(&m.mesh);
    let ao = if ao_samples > 0 {
        let config = FieldConfig {
            ao_samples,
            rng_seed: seed,
            ..FieldConfig::default()
        };
        let bvh = Bvh::build(&m.mesh);
        Some(ambient_occlusion(&m.mesh, &bvh, &config))
    } else {
        None
    };
    match uvforge::metrics::evaluate(
        &m.mesh,
        &adjacency,
        &uv,
        ao.as_ref().map(|f| f.values.as_slice()),
        if tau_scale > 0.0 { tau_scale } else { 0.1 },
        None,
    ) {
        Ok(report) => {
            let json = serde_json::to_string(&report).unwrap_or_default();
            let cs = CString::new(json).unwrap_or_default();
            *out_json = cs.into_raw();
            UvfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from a `uvf_*_json` call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn uvf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
