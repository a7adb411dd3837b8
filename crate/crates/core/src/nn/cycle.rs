//! The two cycle-mapping branches built from the four subnetworks.
//!
//! 2D-3D-2D: lattice -> DeformNet -> WrapNet -> CutNet -> UnwrapNet, with
//! additive residuals in the deform and cut stages. 3D-2D-3D: mesh vertices ->
//! CutNet -> UnwrapNet -> WrapNet. The 3D branch's UnwrapNet output is the
//! learned per-vertex UV map.

use super::net::{MlpTrace, ParamNetIds};
use super::tape::{NodeId, Tape};
use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

/// Regular point lattice covering the unit square.
#[derive(Debug, Clone)]
pub struct GridLattice {
    pub points: Vec<[f64; 2]>,
    pub side: usize,
}

impl GridLattice {
    /// Smallest square lattice with at least `n_vertices` points.
    pub fn for_vertex_count(n_vertices: usize) -> GridLattice {
        let side = (n_vertices as f64).sqrt().ceil().max(2.0) as usize;
        let mut points = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                points.push([
                    i as f64 / (side - 1) as f64,
                    j as f64 / (side - 1) as f64,
                ]);
            }
        }
        GridLattice { points, side }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Node ids produced by the 2D-3D-2D branch.
pub struct Cycle2dNodes {
    pub lattice: NodeId,
    pub q_hat: NodeId,
    pub p_hat: NodeId,
    pub n_hat: NodeId,
    pub p_hat_cut: NodeId,
    pub q_hat_cycle: NodeId,
}

/// Node ids produced by the 3D-2D-3D branch, plus the WrapNet trace needed to
/// differentiate the wrap map with respect to the UVs.
pub struct Cycle3dNodes {
    pub vertices: NodeId,
    pub p_cut: NodeId,
    pub q: NodeId,
    pub p_tilde: NodeId,
    pub n_tilde: NodeId,
    pub wrap_enc_trace: MlpTrace,
    pub wrap_dec_trace: MlpTrace,
    pub wrap_enc_out: NodeId,
}

/// Applies WrapNet to a 2D node: encoder, concat with the input, decoder, then
/// splits the 6 output channels into positions and normals.
fn wrap_forward<S: Scalar>(
    tape: &mut Tape<S>,
    ids: &ParamNetIds,
    q: NodeId,
) -> (NodeId, NodeId, MlpTrace, MlpTrace, NodeId) {
    let (feat, enc_trace) = ids.wrap_enc.forward(tape, q);
    let cat = tape.concat_cols(feat, q);
    let (out6, dec_trace) = ids.wrap_dec.forward(tape, cat);
    let pos = tape.slice_cols(out6, 0, 3);
    let nrm = tape.slice_cols(out6, 3, 6);
    (pos, nrm, enc_trace, dec_trace, feat)
}

/// CutNet residual: p + dec([enc(p); p]).
fn cut_forward<S: Scalar>(tape: &mut Tape<S>, ids: &ParamNetIds, p: NodeId) -> NodeId {
    let (feat, _) = ids.cut_enc.forward(tape, p);
    let cat = tape.concat_cols(feat, p);
    let (offset, _) = ids.cut_dec.forward(tape, cat);
    tape.add(p, offset)
}

pub fn forward_cycle_2d<S: Scalar>(
    tape: &mut Tape<S>,
    ids: &ParamNetIds,
    lattice: &Tensor<S>,
) -> Cycle2dNodes {
    let g = tape.constant(lattice.clone());
    // DeformNet residual.
    let (feat, _) = ids.deform_enc.forward(tape, g);
    let cat = tape.concat_cols(feat, g);
    let (offset, _) = ids.deform_dec.forward(tape, cat);
    let q_hat = tape.add(g, offset);
    let (p_hat, n_hat, _, _, _) = wrap_forward(tape, ids, q_hat);
    let p_hat_cut = cut_forward(tape, ids, p_hat);
    let (q_hat_cycle, _) = ids.unwrap.forward(tape, p_hat_cut);
    Cycle2dNodes {
        lattice: g,
        q_hat,
        p_hat,
        n_hat,
        p_hat_cut,
        q_hat_cycle,
    }
}

pub fn forward_cycle_3d<S: Scalar>(
    tape: &mut Tape<S>,
    ids: &ParamNetIds,
    vertices: &Tensor<S>,
) -> Cycle3dNodes {
    let p = tape.constant(vertices.clone());
    let p_cut = cut_forward(tape, ids, p);
    let (q, _) = ids.unwrap.forward(tape, p_cut);
    let (p_tilde, n_tilde, wrap_enc_trace, wrap_dec_trace, wrap_enc_out) =
        wrap_forward(tape, ids, q);
    Cycle3dNodes {
        vertices: p,
        p_cut,
        q,
        p_tilde,
        n_tilde,
        wrap_enc_trace,
        wrap_dec_trace,
        wrap_enc_out,
    }
}

/// Directional derivative of the WrapNet positions with respect to a constant
/// UV-space direction, replayed through the recorded traces.
pub fn wrap_jvp<S: Scalar>(
    tape: &mut Tape<S>,
    ids: &ParamNetIds,
    cy: &Cycle3dNodes,
    direction: [f64; 2],
) -> NodeId {
    let n = tape.value(cy.q).rows;
    let mut data = Vec::with_capacity(n * 2);
    for _ in 0..n {
        data.push(S::from_f64(direction[0]));
        data.push(S::from_f64(direction[1]));
    }
    let t_q = tape.constant(Tensor::from_vec(n, 2, data));
    let t_feat = ids.wrap_enc.jvp(tape, &cy.wrap_enc_trace, t_q);
    let t_cat = tape.concat_cols(t_feat, t_q);
    let t_out = ids.wrap_dec.jvp(tape, &cy.wrap_dec_trace, t_cat);
    tape.slice_cols(t_out, 0, 3)
}

/// Both cycle branches with the shared WrapNet evaluated once over the
/// stacked 2D inputs `[q_hat; q]`. Per-row results are identical to the
/// separate forwards; stacking just batches the heavy matrix products.
pub fn forward_cycles_joint<S: Scalar>(
    tape: &mut Tape<S>,
    ids: &ParamNetIds,
    lattice: &Tensor<S>,
    vertices: &Tensor<S>,
) -> (Cycle2dNodes, Cycle3dNodes) {
    let n_lat = lattice.rows;
    let n_verts = vertices.rows;
    let g = tape.constant(lattice.clone());
    let p = tape.constant(vertices.clone());

    // DeformNet residual (lattice only).
    let (feat, _) = ids.deform_enc.forward(tape, g);
    let cat = tape.concat_cols(feat, g);
    let (offset, _) = ids.deform_dec.forward(tape, cat);
    let q_hat = tape.add(g, offset);

    // 3D branch through CutNet and UnwrapNet to the vertex UVs.
    let p_cut = cut_forward(tape, ids, p);
    let (q, _) = ids.unwrap.forward(tape, p_cut);

    // One WrapNet pass over both UV sets.
    let q_joint = tape.concat_rows(q_hat, q);
    let (pos, nrm, wrap_enc_trace, wrap_dec_trace, wrap_enc_out) =
        wrap_forward(tape, ids, q_joint);
    let p_hat = tape.slice_rows(pos, 0, n_lat);
    let n_hat = tape.slice_rows(nrm, 0, n_lat);
    let p_tilde = tape.slice_rows(pos, n_lat, n_lat + n_verts);
    let n_tilde = tape.slice_rows(nrm, n_lat, n_lat + n_verts);

    // Finish the 2D branch.
    let p_hat_cut = cut_forward(tape, ids, p_hat);
    let (q_hat_cycle, _) = ids.unwrap.forward(tape, p_hat_cut);

    (
        Cycle2dNodes {
            lattice: g,
            q_hat,
            p_hat,
            n_hat,
            p_hat_cut,
            q_hat_cycle,
        },
        Cycle3dNodes {
            vertices: p,
            p_cut,
            q,
            p_tilde,
            n_tilde,
            wrap_enc_trace,
            wrap_dec_trace,
            wrap_enc_out,
        },
    )
}

/// Both UV tangent frames of the wrap map in one stacked JVP pass over the
/// vertex rows of the joint wrap trace. Returns `(e1, e2)`.
pub fn wrap_jvp_joint<S: Scalar>(
    tape: &mut Tape<S>,
    ids: &ParamNetIds,
    cy: &Cycle3dNodes,
    n_lattice_rows: usize,
) -> (NodeId, NodeId) {
    let n = tape.value(cy.q).rows;
    let mut data = Vec::with_capacity(n * 4);
    for _ in 0..n {
        data.push(S::ONE);
        data.push(S::ZERO);
    }
    for _ in 0..n {
        data.push(S::ZERO);
        data.push(S::ONE);
    }
    let t_q = tape.constant(Tensor::from_vec(2 * n, 2, data));
    let slope = S::from_f64(super::net::LEAKY_SLOPE);
    let (lo, hi) = (n_lattice_rows, n_lattice_rows + n);

    // Encoder JVP restricted to the vertex rows, tiled for both tangents.
    let mut t = t_q;
    for ((w, _), (_, out, act)) in ids
        .wrap_enc
        .layers
        .iter()
        .zip(&cy.wrap_enc_trace.layers)
    {
        t = tape.matmul(t, *w);
        if *act {
            let mask = tape.lrelu_mask_rows(*out, slope, lo, hi, 2);
            t = tape.mul_mask(t, mask);
        }
    }
    let t_cat = tape.concat_cols(t, t_q);
    let mut t = t_cat;
    for ((w, _), (_, out, act)) in ids
        .wrap_dec
        .layers
        .iter()
        .zip(&cy.wrap_dec_trace.layers)
    {
        t = tape.matmul(t, *w);
        if *act {
            let mask = tape.lrelu_mask_rows(*out, slope, lo, hi, 2);
            t = tape.mul_mask(t, mask);
        }
    }
    let pos = tape.slice_cols(t, 0, 3);
    let e1 = tape.slice_rows(pos, 0, n);
    let e2 = tape.slice_rows(pos, n, 2 * n);
    (e1, e2)
}

/// Plain-value forward of both cycles with NaN detection; the per-node API is
/// what training uses, this is the library surface for callers that just want
/// the arrays.
pub struct CycleOutputs {
    pub q_hat: Vec<[f64; 2]>,
    pub p_hat: Vec<[f64; 3]>,
    pub n_hat: Vec<[f64; 3]>,
    pub p_hat_cut: Vec<[f64; 3]>,
    pub q_hat_cycle: Vec<[f64; 2]>,
    pub p_cut: Vec<[f64; 3]>,
    pub q: Vec<[f64; 2]>,
    pub p_tilde: Vec<[f64; 3]>,
    pub n_tilde: Vec<[f64; 3]>,
}

pub fn run_cycles<S: Scalar>(
    params: &super::net::ParamNet<S>,
    lattice: &GridLattice,
    vertices: &[crate::geom::Vec3],
) -> Result<CycleOutputs> {
    let mut tape = Tape::<S>::new();
    let ids = params.register(&mut tape);
    let lat = Tensor::from_rows2(&lattice.points);
    let verts: Vec<[f64; 3]> = vertices.iter().map(|v| [v.x, v.y, v.z]).collect();
    let verts = Tensor::from_rows3(&verts);
    let c2 = forward_cycle_2d(&mut tape, &ids, &lat);
    let c3 = forward_cycle_3d(&mut tape, &ids, &verts);

    let rows2 = |t: &Tensor<S>| -> Vec<[f64; 2]> {
        (0..t.rows)
            .map(|r| [t.get(r, 0).to_f64(), t.get(r, 1).to_f64()])
            .collect()
    };
    let rows3 = |t: &Tensor<S>| -> Vec<[f64; 3]> {
        (0..t.rows)
            .map(|r| {
                [
                    t.get(r, 0).to_f64(),
                    t.get(r, 1).to_f64(),
                    t.get(r, 2).to_f64(),
                ]
            })
            .collect()
    };
    let out = CycleOutputs {
        q_hat: rows2(tape.value(c2.q_hat)),
        p_hat: rows3(tape.value(c2.p_hat)),
        n_hat: rows3(tape.value(c2.n_hat)),
        p_hat_cut: rows3(tape.value(c2.p_hat_cut)),
        q_hat_cycle: rows2(tape.value(c2.q_hat_cycle)),
        p_cut: rows3(tape.value(c3.p_cut)),
        q: rows2(tape.value(c3.q)),
        p_tilde: rows3(tape.value(c3.p_tilde)),
        n_tilde: rows3(tape.value(c3.n_tilde)),
    };
    for (name, ok) in [
        ("q_hat", tape.value(c2.q_hat).all_finite()),
        ("p_hat", tape.value(c2.p_hat).all_finite()),
        ("q_hat_cycle", tape.value(c2.q_hat_cycle).all_finite()),
        ("q", tape.value(c3.q).all_finite()),
        ("p_tilde", tape.value(c3.p_tilde).all_finite()),
    ] {
        if !ok {
            return Err(Error::TrainingAborted {
                msg: format!("non-finite values in {name}"),
                checkpoint: None,
            });
        }
    }
    Ok(out)
}
