//! Semantic partitioning from local thickness: ShDF smoothing/normalization,
//! 1-D GMM likelihoods, graph-cut refinement, component relabeling and
//! post-processing.

mod gmm;
mod graphcut;
mod maxflow;
mod refine;

pub use gmm::{fit_gmm_1d, Gmm1d, VARIANCE_FLOOR};
pub use graphcut::{alpha_expansion, smoothness_costs, GraphCutProblem, PairCost};
pub use maxflow::FlowGraph;
pub use refine::{default_min_faces, postprocess_labels, relabel_components};

use serde::{Deserialize, Serialize};

use crate::label::Labeling;
use crate::mesh::{face_adjacency, Mesh};
use crate::spatial::{self, Bvh, FieldConfig};
use crate::{Error, Result};

/// Parameters of the full partitioning pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub fields: FieldConfig,
    /// Laplacian smoothing rounds on the raw ShDF field.
    pub smooth_iterations: usize,
    pub gmm_max_iter: usize,
    pub gmm_tol: f64,
    /// Smoothness strength relative to the mean unary magnitude.
    pub lambda_smooth: f64,
    /// Alpha-expansion sweeps.
    pub sweeps: usize,
    /// Minimum surviving component size; `None` picks
    /// `max(20, faces / 200)`.
    pub min_faces: Option<usize>,
    pub majority_rounds: usize,
    pub seed: u64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            fields: FieldConfig::default(),
            smooth_iterations: 2,
            gmm_max_iter: 100,
            gmm_tol: 1e-7,
            lambda_smooth: 0.3,
            sweeps: 3,
            min_faces: None,
            majority_rounds: 1,
            seed: 0,
        }
    }
}

/// Everything the pipeline produced, for inspection and tests.
#[derive(Debug, Clone)]
pub struct SegmentResult {
    pub labeling: Labeling,
    /// Normalized thickness field driving the unaries.
    pub shdf_normalized: Vec<f64>,
    /// Accepted-move energy trace of the expansion.
    pub energy_trace: Vec<f64>,
    pub gmm: Gmm1d,
}

/// Per-vertex view of a per-face labeling: each vertex takes the majority
/// label of its incident faces (ties resolve to the smallest label).
pub fn vertex_labels_majority(mesh: &Mesh, labeling: &Labeling) -> Vec<u32> {
    let mut counts: Vec<std::collections::BTreeMap<u32, usize>> =
        vec![Default::default(); mesh.vertex_count()];
    for (f, &l) in labeling.labels.iter().enumerate() {
        for &v in &mesh.faces[f] {
            *counts[v as usize].entry(l).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .map(|c| {
            c.into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map_or(0, |(l, _)| l)
        })
        .collect()
}

/// One Laplacian smoothing round: each face value becomes the area-weighted
/// mean of itself and its edge neighbors. Then the log compression
/// `(log(1+x) - min) / (max - min)` maps the field to [0, 1]. A constant
/// field maps to all zeros.
pub fn smooth_and_normalize_shdf(mesh: &Mesh, shdf: &[f64], iterations: usize) -> Vec<f64> {
    assert_eq!(shdf.len(), mesh.face_count());
    let adjacency = face_adjacency(mesh);
    let neighbors = adjacency.face_neighbors(mesh.face_count());
    let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();

    let mut field = shdf.to_vec();
    for _ in 0..iterations {
        let mut next = vec![0.0f64; field.len()];
        for f in 0..field.len() {
            let mut num = areas[f] * field[f];
            let mut den = areas[f];
            for &g in &neighbors[f] {
                num += areas[g as usize] * field[g as usize];
                den += areas[g as usize];
            }
            next[f] = if den > 0.0 { num / den } else { field[f] };
        }
        field = next;
    }

    let logs: Vec<f64> = field.iter().map(|&v| (1.0 + v).ln()).collect();
    let min = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min < 1e-15 {
        return vec![0.0; logs.len()];
    }
    logs.iter().map(|&l| (l - min) / (max - min)).collect()
}

/// Full partition-and-refine pipeline: ShDF, smoothing and normalization,
/// GMM likelihoods, argmax initialization, alpha-expansion, relabeling and
/// post-processing. Deterministic under a fixed seed.
pub fn segment_mesh(mesh: &Mesh, k: usize, config: &SegmentConfig) -> Result<SegmentResult> {
    let fields = FieldConfig {
        rng_seed: config.seed,
        ..config.fields
    };
    fields.validate()?;
    if mesh.face_count() == 0 {
        return Err(Error::Segmentation("mesh has no faces".into()));
    }
    let bvh = Bvh::build(mesh);
    let shdf = spatial::shape_diameter(mesh, &bvh, &fields);
    segment_mesh_with_shdf(mesh, k, config, &shdf)
}

/// As [`segment_mesh`] but with a precomputed raw thickness field (callers
/// may cache ShDF across runs).
pub fn segment_mesh_with_shdf(
    mesh: &Mesh,
    k: usize,
    config: &SegmentConfig,
    shdf: &crate::spatial::ScalarField,
) -> Result<SegmentResult> {
    if k == 0 {
        return Err(Error::Segmentation("k must be >= 1".into()));
    }
    if mesh.face_count() == 0 {
        return Err(Error::Segmentation("mesh has no faces".into()));
    }
    if shdf.values.len() != mesh.face_count() {
        return Err(Error::Segmentation("shdf field must be per-face".into()));
    }
    let normalized = smooth_and_normalize_shdf(mesh, &shdf.values, config.smooth_iterations);

    let gmm = fit_gmm_1d(
        &normalized,
        k,
        config.gmm_max_iter,
        config.gmm_tol,
        config.seed,
    )
    .map_err(|e| Error::Segmentation(format!("gmm stage: {e}")))?;

    // Unaries: negative log posteriors (epsilon-guarded); init: argmax.
    let n = mesh.face_count();
    let mut unary = vec![0.0f64; n * k];
    let mut init = vec![0u32; n];
    for (f, &x) in normalized.iter().enumerate() {
        let post = gmm.posteriors(x);
        let mut best = 0usize;
        for (j, &p) in post.iter().enumerate() {
            // The epsilon can push a saturated posterior past 1; clamp at 0.
            unary[f * k + j] = (-(p + 1e-12).ln()).max(0.0);
            if p > post[best] {
                best = j;
            }
        }
        init[f] = best as u32;
    }
    let mean_unary = unary.iter().map(|c| c.abs()).sum::<f64>() / unary.len() as f64;
    let adjacency = face_adjacency(mesh);
    let pairwise = smoothness_costs(mesh, &adjacency, config.lambda_smooth * mean_unary);
    let problem = GraphCutProblem::new(n, k, unary, pairwise)?;
    let (refined, energy_trace) = alpha_expansion(&problem, &init, config.sweeps)?;

    let relabeled = relabel_components(mesh, &adjacency, &refined);
    let min_faces = config.min_faces.unwrap_or_else(|| default_min_faces(n));
    let labeling = postprocess_labels(
        mesh,
        &adjacency,
        &relabeled,
        min_faces,
        config.majority_rounds,
    );
    Ok(SegmentResult {
        labeling,
        shdf_normalized: normalized,
        energy_trace,
        gmm,
    })
}
