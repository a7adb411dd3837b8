//! Differentiable training objectives: wrap (chamfer + normals), cycle
//! consistency, UV repulsion, the two distortion penalties (Jacobian-level and
//! triangle-based), soft seam extraction and the occlusion-weighted seam
//! loss, plus the weighted composites.

mod distortion;
mod geometric;
mod seam;

pub use distortion::{ddl, differential_frame, tdl, TdlData};
pub use geometric::{
    chamfer, chamfer_points, cycle_loss, default_repulsion_margin, nearest_neighbor_indices,
    repulsion_loss, wrap_loss,
};
pub use seam::{
    ao_seam_loss, seam_scores_values, soft_seam_scores, uv_bounding_side, RingIndex, SeamNodes,
    SeamScores,
};

use serde::{Deserialize, Serialize};

use crate::nn::{NodeId, Scalar, Tape};

/// Weights of the composite objectives. The defaults are the published
/// training coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_wrap: f64,
    /// Repulsion ("unwrap") weight.
    pub w_repel: f64,
    pub w_cycle_p: f64,
    pub w_cycle_n: f64,
    pub w_ddl: f64,
    pub w_tdl: f64,
    pub lambda_vis: f64,
    /// Normal-consistency weight inside the wrap loss.
    pub kappa_norm: f64,
    pub epsilon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_wrap: 1.0,
            w_repel: 0.01,
            w_cycle_p: 0.01,
            w_cycle_n: 0.005,
            w_ddl: 0.01,
            w_tdl: 1e-5,
            lambda_vis: 0.004,
            kappa_norm: 0.1,
            epsilon: 1e-8,
        }
    }
}

/// Soft seam extraction parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SeamConfig {
    /// Neighbor count for the point-cloud fallback; on meshes the 1-ring is
    /// used directly.
    pub neighbor_count: usize,
    /// Soft-max sharpness.
    pub gamma: f64,
    /// Sigmoid sharpness.
    pub beta: f64,
    /// Threshold as a fraction of the UV bounding-square side.
    pub tau_scale: f64,
}

impl Default for SeamConfig {
    fn default() -> Self {
        SeamConfig {
            neighbor_count: 8,
            gamma: 100.0,
            beta: 50.0,
            tau_scale: 0.1,
        }
    }
}

impl SeamConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.gamma <= 0.0 || self.beta <= 0.0 {
            return Err(crate::Error::InvalidArgument(
                "gamma and beta must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.tau_scale) || self.tau_scale == 0.0 {
            return Err(crate::Error::InvalidArgument(
                "tau_scale must lie in (0, 1)".into(),
            ));
        }
        if self.neighbor_count == 0 {
            return Err(crate::Error::InvalidArgument(
                "neighbor_count must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// The individual base-objective terms, as tape nodes.
pub struct BaseTerms {
    pub wrap: NodeId,
    pub repel: NodeId,
    pub cycle_p: NodeId,
    pub cycle_n: NodeId,
    pub ddl: NodeId,
    pub tdl: NodeId,
}

/// Weighted sum of the six base terms.
pub fn base_objective<S: Scalar>(
    tape: &mut Tape<S>,
    terms: &BaseTerms,
    w: &LossWeights,
) -> NodeId {
    let mut total = tape.scale(terms.wrap, S::from_f64(w.w_wrap));
    for (node, weight) in [
        (terms.repel, w.w_repel),
        (terms.cycle_p, w.w_cycle_p),
        (terms.cycle_n, w.w_cycle_n),
        (terms.ddl, w.w_ddl),
        (terms.tdl, w.w_tdl),
    ] {
        let scaled = tape.scale(node, S::from_f64(weight));
        total = tape.add(total, scaled);
    }
    total
}

/// base + lambda_vis * seam AO loss.
pub fn visibility_objective<S: Scalar>(
    tape: &mut Tape<S>,
    base: NodeId,
    ao_seam: NodeId,
    lambda_vis: f64,
) -> NodeId {
    let scaled = tape.scale(ao_seam, S::from_f64(lambda_vis));
    tape.add(base, scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn composite_weighting() {
        let mut t = Tape::<f64>::new();
        let zero = t.scalar_const(0.0);
        let one = t.scalar_const(1.0);
        // Only repulsion nonzero.
        let terms = BaseTerms {
            wrap: zero,
            repel: one,
            cycle_p: zero,
            cycle_n: zero,
            ddl: zero,
            tdl: zero,
        };
        let total = base_objective(&mut t, &terms, &LossWeights::default());
        assert!((t.value(total).scalar() - 0.01).abs() < 1e-15);
        // Only TDL nonzero.
        let terms = BaseTerms {
            wrap: zero,
            repel: zero,
            cycle_p: zero,
            cycle_n: zero,
            ddl: zero,
            tdl: one,
        };
        let total = base_objective(&mut t, &terms, &LossWeights::default());
        assert!((t.value(total).scalar() - 1e-5).abs() < 1e-18);
        // All zero -> zero.
        let terms = BaseTerms {
            wrap: zero,
            repel: zero,
            cycle_p: zero,
            cycle_n: zero,
            ddl: zero,
            tdl: zero,
        };
        let total = base_objective(&mut t, &terms, &LossWeights::default());
        assert_eq!(t.value(total).scalar(), 0.0);
    }

    #[test]
    fn visibility_composite() {
        let mut t = Tape::<f64>::new();
        let base = t.constant(Tensor::from_vec(1, 1, vec![0.0]));
        let ao = t.scalar_const(1.0);
        let v = visibility_objective(&mut t, base, ao, 0.004);
        assert!((t.value(v).scalar() - 0.004).abs() < 1e-15);
        // ao = 0 reduces to base.
        let base2 = t.scalar_const(0.7);
        let ao0 = t.scalar_const(0.0);
        let v2 = visibility_objective(&mut t, base2, ao0, 0.004);
        assert_eq!(t.value(v2).scalar(), 0.7);
        // Linear in the seam loss.
        let ao2 = t.scalar_const(2.0);
        let v3 = visibility_objective(&mut t, base, ao2, 0.004);
        assert!((t.value(v3).scalar() - 0.008).abs() < 1e-15);
    }
}
