//! Ambient occlusion and shape-diameter estimation by stochastic ray casting.
//!
//! Per-element RNG streams are derived from `(seed, element index)`, so
//! results are independent of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::spatial::{Bvh, Ray};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldDomain {
    Vertex,
    Face,
}

/// Per-vertex or per-face scalar values with their declared domain and range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarField {
    pub domain: FieldDomain,
    pub values: Vec<f64>,
    /// Declared (not observed) value range.
    pub range: (f64, f64),
}

impl ScalarField {
    pub fn per_vertex(values: Vec<f64>, range: (f64, f64)) -> ScalarField {
        ScalarField {
            domain: FieldDomain::Vertex,
            values,
            range,
        }
    }

    pub fn per_face(values: Vec<f64>, range: (f64, f64)) -> ScalarField {
        ScalarField {
            domain: FieldDomain::Face,
            values,
            range,
        }
    }
}

/// Sampling parameters for the field estimators.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Rays per vertex for ambient occlusion.
    pub ao_samples: u32,
    /// Rays per face for the shape diameter function.
    pub shdf_rays: u32,
    /// Full opening angle of the ShDF cone, radians.
    pub cone_full_angle: f64,
    /// Ray-origin offset as a fraction of the bounding-box diagonal.
    pub offset_eps: f64,
    pub rng_seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            ao_samples: 256,
            shdf_rays: 60,
            cone_full_angle: 2.0 * std::f64::consts::PI / 3.0, // 120 degrees
            offset_eps: 1e-4,
            rng_seed: 0,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.ao_samples < 1 || self.shdf_rays < 1 {
            return Err(crate::Error::InvalidArgument(
                "ao_samples and shdf_rays must be >= 1".into(),
            ));
        }
        if !(self.cone_full_angle > 0.0 && self.cone_full_angle < std::f64::consts::PI) {
            return Err(crate::Error::InvalidArgument(
                "cone_full_angle must lie in (0, pi)".into(),
            ));
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, element: usize, salt: u64) -> ChaCha8Rng {
    let h = seed
        ^ (element as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(h)
}

/// Cosine-weighted direction on the hemisphere about `n`.
fn cosine_hemisphere(n: Vec3, rng: &mut ChaCha8Rng) -> Vec3 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let r = u1.sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    let (t, b) = n.orthonormal_basis();
    let z = (1.0 - u1).max(0.0).sqrt();
    t * (r * phi.cos()) + b * (r * phi.sin()) + n * z
}

/// Uniform (in solid angle) direction inside the cone of half-angle
/// `half_angle` about `axis`.
fn uniform_cone(axis: Vec3, half_angle: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let cos_max = half_angle.cos();
    let cos_theta = 1.0 - u1 * (1.0 - cos_max);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    let (t, b) = axis.orthonormal_basis();
    t * (sin_theta * phi.cos()) + b * (sin_theta * phi.sin()) + axis * cos_theta
}

/// Monte-Carlo ambient occlusion per vertex: the cosine-weighted fraction of
/// the hemisphere above each vertex that reaches the environment. 1 means
/// fully exposed, 0 fully occluded.
pub fn ambient_occlusion(mesh: &Mesh, bvh: &Bvh, config: &FieldConfig) -> ScalarField {
    let eps = config.offset_eps * mesh.bounding_box().diagonal();
    let values: Vec<f64> = (0..mesh.vertex_count())
        .into_par_iter()
        .map(|vi| {
            let mut rng = stream_rng(config.rng_seed, vi, 0xA0);
            let p = mesh.vertices[vi];
            let n = mesh.normals[vi];
            let origin = p + n * eps;
            let mut visible = 0u32;
            for _ in 0..config.ao_samples {
                let dir = cosine_hemisphere(n, &mut rng);
                if !bvh.hits_any(Ray { origin, dir }, 0.0) {
                    visible += 1;
                }
            }
            visible as f64 / config.ao_samples as f64
        })
        .collect();
    ScalarField::per_vertex(values, (0.0, 1.0))
}

/// Shape diameter per face: median distance to the first intersection over
/// rays cast uniformly inside a cone about the inward face normal. Faces whose
/// rays all miss fall back to the mesh-wide median.
pub fn shape_diameter(mesh: &Mesh, bvh: &Bvh, config: &FieldConfig) -> ScalarField {
    let eps = config.offset_eps * mesh.bounding_box().diagonal();
    let half_angle = config.cone_full_angle / 2.0;
    let mut values: Vec<f64> = (0..mesh.face_count())
        .into_par_iter()
        .map(|fi| {
            let mut rng = stream_rng(config.rng_seed, fi, 0x5D);
            let centroid = mesh.face_centroid(fi);
            let inward = -mesh.face_normal(fi);
            if inward.norm() == 0.0 {
                return f64::NAN;
            }
            let origin = centroid + inward * eps;
            let mut lengths = Vec::with_capacity(config.shdf_rays as usize);
            for _ in 0..config.shdf_rays {
                let dir = uniform_cone(inward, half_angle, &mut rng);
                if let Some(hit) = bvh.intersect(Ray { origin, dir }, 0.0, Some(fi as u32)) {
                    lengths.push(hit.t + eps);
                }
            }
            if lengths.is_empty() {
                f64::NAN
            } else {
                median(&mut lengths)
            }
        })
        .collect();

    let mut defined: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let fallback = if defined.is_empty() {
        0.0
    } else {
        median(&mut defined)
    };
    for v in &mut values {
        if !v.is_finite() {
            *v = fallback;
        }
    }
    ScalarField::per_face(values, (0.0, f64::INFINITY))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
