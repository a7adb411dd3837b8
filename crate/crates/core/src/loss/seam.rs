//! Differentiable seam extraction: per-vertex soft max of 1-ring UV distances
//! through a stabilized log-sum-exp, sigmoid membership, and the
//! occlusion-weighted seam loss.

use std::rc::Rc;

use super::SeamConfig;
use crate::mesh::Adjacency;
use crate::nn::{NodeId, Scalar, Tape, Tensor};

/// Flattened 1-ring edge lists for seam scoring.
#[derive(Debug, Clone)]
pub struct RingIndex {
    /// Edge source vertex (also the segment id).
    pub src: Rc<Vec<u32>>,
    /// Edge destination vertex.
    pub dst: Rc<Vec<u32>>,
    pub n_vertices: usize,
    /// Vertices with empty rings; their membership is pinned to zero.
    pub isolated: Vec<u32>,
}

impl RingIndex {
    pub fn from_adjacency(adjacency: &Adjacency) -> RingIndex {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut isolated = Vec::new();
        for (i, ring) in adjacency.vertex_one_rings.iter().enumerate() {
            if ring.is_empty() {
                isolated.push(i as u32);
                continue;
            }
            for &j in ring {
                src.push(i as u32);
                dst.push(j);
            }
        }
        RingIndex {
            src: Rc::new(src),
            dst: Rc::new(dst),
            n_vertices: adjacency.vertex_one_rings.len(),
            isolated,
        }
    }
}

/// Tape nodes and detached scalars produced by seam scoring.
pub struct SeamNodes {
    /// Per-vertex soft max UV distance (Nx1).
    pub eta: NodeId,
    /// Per-vertex membership in [0, 1) (Nx1); exactly zero for isolated
    /// vertices.
    pub s: NodeId,
    /// Threshold used this evaluation: tau_scale * L(Q).
    pub tau: f64,
    /// Side of the UV bounding square, L(Q).
    pub uv_side: f64,
}

/// Plain-value seam scores (library surface; training reads the nodes).
#[derive(Debug, Clone)]
pub struct SeamScores {
    pub eta: Vec<f64>,
    pub s: Vec<f64>,
    pub uv_side: f64,
    pub tau: f64,
}

/// Side length of the bounding square of a UV node's values.
pub fn uv_bounding_side<S: Scalar>(q: &Tensor<S>) -> f64 {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for r in 0..q.rows {
        for c in 0..2 {
            let v = q.get(r, c).to_f64();
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    (max[0] - min[0]).max(max[1] - min[1]).max(0.0)
}

/// Soft seam membership per vertex (Eqs. in the seam-extraction step):
/// eta_i is the gamma-sharp soft max of UV distances to ring neighbors,
/// s_i = sigmoid(beta * (eta_i - tau)) with tau = tau_scale * L(Q).
pub fn soft_seam_scores<S: Scalar>(
    tape: &mut Tape<S>,
    q: NodeId,
    rings: &RingIndex,
    config: &SeamConfig,
) -> SeamNodes {
    let n = rings.n_vertices;
    assert_eq!(tape.value(q).rows, n, "uv rows must match ring vertices");
    let qi = tape.gather_rows(q, rings.src.clone());
    let qj = tape.gather_rows(q, rings.dst.clone());
    let diff = tape.sub(qi, qj);
    let d = tape.row_norm(diff, S::from_f64(1e-20));
    let scaled = tape.scale(d, S::from_f64(config.gamma));

    // Detached per-vertex shift for a stable log-sum-exp; the shift cancels
    // in the gradient.
    let scaled_vals = tape.value(scaled).to_f64_vec();
    let mut shift = vec![0.0f64; n];
    for (e, &s) in rings.src.iter().enumerate() {
        shift[s as usize] = shift[s as usize].max(scaled_vals[e]);
    }
    let shift_node = tape.constant(Tensor::from_f64_slice(n, 1, &shift));
    let shift_per_edge = tape.gather_rows(shift_node, rings.src.clone());
    let centered = tape.sub(scaled, shift_per_edge);
    let ex = tape.exp(centered);
    let sums = tape.segment_sum(ex, rings.src.clone(), n);
    // Keep the log finite on empty segments; those entries are masked below.
    let iso_fill: Vec<f64> = {
        let mut v = vec![0.0f64; n];
        for &i in &rings.isolated {
            v[i as usize] = 1.0;
        }
        v
    };
    let iso_node = tape.constant(Tensor::from_f64_slice(n, 1, &iso_fill));
    let sums = tape.add(sums, iso_node);
    let log_sums = tape.ln(sums);
    let eta_scaled = tape.add(shift_node, log_sums);
    let eta = tape.scale(eta_scaled, S::from_f64(1.0 / config.gamma));

    // Differentiable threshold: tau = tau_scale * L(Q) with L the larger
    // side of the UV bounding box.
    let hi = tape.col_max(q);
    let lo = tape.col_min(q);
    let span = tape.sub(hi, lo);
    let side = tape.reduce_max(span);
    let tau_node = tape.scale(side, S::from_f64(config.tau_scale));
    let uv_side = tape.value(side).scalar().to_f64();
    let tau = tape.value(tau_node).scalar().to_f64();
    let centered_eta = tape.sub(eta, tau_node);
    let arg = tape.scale(centered_eta, S::from_f64(config.beta));
    let s = tape.sigmoid(arg);
    let s = if rings.isolated.is_empty() {
        s
    } else {
        let mask: Vec<f64> = iso_fill.iter().map(|&v| 1.0 - v).collect();
        let mask = Rc::new(Tensor::from_f64_slice(n, 1, &mask));
        tape.mul_mask(s, mask)
    };
    SeamNodes {
        eta,
        s,
        tau,
        uv_side,
    }
}

/// Occlusion-weighted seam loss: sum(s_i * ao_i) / (sum(s_i) + eps). With the
/// exposure convention (1 = exposed) minimizing this drives seams toward
/// occluded vertices.
pub fn ao_seam_loss<S: Scalar>(tape: &mut Tape<S>, s: NodeId, ao: NodeId, eps: f64) -> NodeId {
    let weighted = tape.mul(s, ao);
    let num = tape.sum_all(weighted);
    let den = tape.sum_all(s);
    let den = tape.add_const(den, S::from_f64(eps));
    tape.div(num, den)
}

/// Convenience evaluation of seam scores on plain values.
pub fn seam_scores_values(
    uv: &[[f64; 2]],
    rings: &RingIndex,
    config: &SeamConfig,
) -> SeamScores {
    let mut tape = Tape::<f64>::new();
    let q = tape.constant(Tensor::from_rows2(uv));
    let nodes = soft_seam_scores(&mut tape, q, rings, config);
    SeamScores {
        eta: tape.value(nodes.eta).to_f64_vec(),
        s: tape.value(nodes.s).to_f64_vec(),
        uv_side: nodes.uv_side,
        tau: nodes.tau,
    }
}
