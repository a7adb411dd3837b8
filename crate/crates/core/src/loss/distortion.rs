//! Distortion penalties: the Jacobian-level differential loss (DDL) on the
//! wrap map's UV tangent frame, and the triangle-based discrete loss (TDL)
//! comparing UV corner cosines and normalized areas against the 3D mesh.

use std::rc::Rc;

use crate::geom::corner_angle;
use crate::mesh::Mesh;
use crate::nn::cycle::Cycle3dNodes;
use crate::nn::{wrap_jvp, NodeId, ParamNetIds, Scalar, Tape, Tensor};

/// Tangent vectors of the wrap map: e1 = d(wrap position)/du,
/// e2 = d(wrap position)/dv, evaluated at the 3D branch's UVs.
pub fn differential_frame<S: Scalar>(
    tape: &mut Tape<S>,
    ids: &ParamNetIds,
    cycle: &Cycle3dNodes,
) -> (NodeId, NodeId) {
    let e1 = wrap_jvp(tape, ids, cycle, [1.0, 0.0]);
    let e2 = wrap_jvp(tape, ids, cycle, [0.0, 1.0]);
    (e1, e2)
}

/// Mean of (e1 . e2)^2 + (|e1| - |e2|)^2: zero exactly for orthogonal frames
/// of equal scale (a conformality condition on the Jacobian).
pub fn ddl<S: Scalar>(tape: &mut Tape<S>, e1: NodeId, e2: NodeId) -> NodeId {
    let prod = tape.mul(e1, e2);
    let dot = tape.sum_cols(prod);
    let dot_sq = tape.square(dot);
    let n1 = tape.row_norm(e1, S::from_f64(1e-20));
    let n2 = tape.row_norm(e2, S::from_f64(1e-20));
    let nd = tape.sub(n1, n2);
    let nd_sq = tape.square(nd);
    let total = tape.add(dot_sq, nd_sq);
    tape.mean_all(total)
}

/// Precomputed 3D reference quantities for the TDL.
pub struct TdlData {
    ia: Rc<Vec<u32>>,
    ib: Rc<Vec<u32>>,
    ic: Rc<Vec<u32>>,
    /// cos of the 3D interior angle at each corner, one column per corner.
    cos3d: [Vec<f64>; 3],
    /// Normalized 3D face areas.
    area3d: Vec<f64>,
}

impl TdlData {
    pub fn new(mesh: &Mesh) -> TdlData {
        let nf = mesh.face_count();
        let mut ia = Vec::with_capacity(nf);
        let mut ib = Vec::with_capacity(nf);
        let mut ic = Vec::with_capacity(nf);
        let mut cos3d = [
            Vec::with_capacity(nf),
            Vec::with_capacity(nf),
            Vec::with_capacity(nf),
        ];
        let mut area3d = Vec::with_capacity(nf);
        let total: f64 = mesh.total_area().max(1e-300);
        for (f, face) in mesh.faces.iter().enumerate() {
            let (a, b, c) = (
                mesh.vertices[face[0] as usize],
                mesh.vertices[face[1] as usize],
                mesh.vertices[face[2] as usize],
            );
            ia.push(face[0]);
            ib.push(face[1]);
            ic.push(face[2]);
            cos3d[0].push(corner_angle(a, b, c).cos());
            cos3d[1].push(corner_angle(b, c, a).cos());
            cos3d[2].push(corner_angle(c, a, b).cos());
            area3d.push(mesh.face_area(f) / total);
        }
        TdlData {
            ia: Rc::new(ia),
            ib: Rc::new(ib),
            ic: Rc::new(ic),
            cos3d,
            area3d,
        }
    }
}

const DEGENERATE_UV_AREA: f64 = 1e-12;

/// Triangle-based distortion of the per-vertex UV node `q` against the 3D
/// reference: summed squared corner-cosine deviations plus squared normalized
/// area deviation; UV-degenerate faces contribute a fixed penalty of one.
pub fn tdl<S: Scalar>(tape: &mut Tape<S>, q: NodeId, data: &TdlData) -> NodeId {
    let nf = data.ia.len();
    let qa = tape.gather_rows(q, data.ia.clone());
    let qb = tape.gather_rows(q, data.ib.clone());
    let qc = tape.gather_rows(q, data.ic.clone());

    let eps = S::from_f64(1e-12);
    let cos_at = |tape: &mut Tape<S>, p: NodeId, r: NodeId, s: NodeId| {
        let u = tape.sub(r, p);
        let v = tape.sub(s, p);
        tape.cosine_rows(u, v, eps)
    };
    let cos_a = cos_at(tape, qa, qb, qc);
    let cos_b = cos_at(tape, qb, qc, qa);
    let cos_c = cos_at(tape, qc, qa, qb);

    let mut angle_sum: Option<NodeId> = None;
    for (cos_uv, reference) in [cos_a, cos_b, cos_c].iter().zip(&data.cos3d) {
        let ref_node = tape.constant(Tensor::from_f64_slice(nf, 1, reference));
        let d = tape.sub(*cos_uv, ref_node);
        let sq = tape.square(d);
        angle_sum = Some(match angle_sum {
            None => sq,
            Some(acc) => tape.add(acc, sq),
        });
    }
    let angle_sum = angle_sum.unwrap();

    // Signed UV area via the 2D cross product.
    let u = tape.sub(qb, qa);
    let v = tape.sub(qc, qa);
    let ux = tape.slice_cols(u, 0, 1);
    let uy = tape.slice_cols(u, 1, 2);
    let vx = tape.slice_cols(v, 0, 1);
    let vy = tape.slice_cols(v, 1, 2);
    let c1 = tape.mul(ux, vy);
    let c2 = tape.mul(uy, vx);
    let cross = tape.sub(c1, c2);
    let signed2 = cross; // twice the signed area
    let area = tape.abs(signed2);
    let area = tape.scale(area, S::from_f64(0.5));

    // Detached degenerate mask from current values.
    let area_vals = tape.value(area).to_f64_vec();
    let mask_vec: Vec<f64> = area_vals
        .iter()
        .map(|&a| if a < DEGENERATE_UV_AREA { 0.0 } else { 1.0 })
        .collect();
    let penalty_vec: Vec<f64> = mask_vec.iter().map(|&m| 1.0 - m).collect();
    let mask = Rc::new(Tensor::from_f64_slice(nf, 1, &mask_vec));

    let masked_area = tape.mul_mask(area, mask.clone());
    let total_uv = tape.sum_all(masked_area);
    let total_uv = tape.add_const(total_uv, S::from_f64(1e-300));
    let a_hat = tape.div(masked_area, total_uv);
    let a_ref = tape.constant(Tensor::from_f64_slice(nf, 1, &data.area3d));
    let a_diff = tape.sub(a_hat, a_ref);
    let area_term = tape.square(a_diff);

    let per_face = tape.add(angle_sum, area_term);
    let per_face = tape.mul_mask(per_face, mask);
    let penalty = tape.constant(Tensor::from_f64_slice(nf, 1, &penalty_vec));
    let per_face = tape.add(per_face, penalty);
    tape.mean_all(per_face)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::net::{LinearParams, Mlp, ParamNet};
    use crate::synth;

    #[test]
    fn ddl_zero_for_isometric_frame() {
        let mut t = Tape::<f64>::new();
        let e1 = t.constant(Tensor::from_rows3(&[[1.0, 0.0, 0.0], [0.0, 0.8, 0.6]]));
        let e2 = t.constant(Tensor::from_rows3(&[[0.0, 1.0, 0.0], [0.0, -0.6, 0.8]]));
        // Second row: e2 orthogonal to e1 with equal (unit) norm.
        let l = ddl(&mut t, e1, e2);
        assert!(t.value(l).scalar() < 1e-12);
    }

    #[test]
    fn ddl_anisotropy_closed_form() {
        let mut t = Tape::<f64>::new();
        let e1 = t.constant(Tensor::from_rows3(&[[1.0, 0.0, 0.0]]));
        let e2 = t.constant(Tensor::from_rows3(&[[0.0, 2.0, 0.0]]));
        let l = ddl(&mut t, e1, e2);
        assert!((t.value(l).scalar() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ddl_rotation_invariant() {
        // Rotating a zero-loss frame keeps it zero.
        let r = |v: [f64; 3]| {
            // 30-degree rotation about z then 45 about x.
            let (s1, c1) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
            let (x, y, z) = (c1 * v[0] - s1 * v[1], s1 * v[0] + c1 * v[1], v[2]);
            let (s2, c2) = (45f64.to_radians().sin(), 45f64.to_radians().cos());
            [x, c2 * y - s2 * z, s2 * y + c2 * z]
        };
        let mut t = Tape::<f64>::new();
        let e1 = t.constant(Tensor::from_rows3(&[r([1.0, 0.0, 0.0])]));
        let e2 = t.constant(Tensor::from_rows3(&[r([0.0, 1.0, 0.0])]));
        let l = ddl(&mut t, e1, e2);
        assert!(t.value(l).scalar() < 1e-15);
    }

    #[test]
    fn differential_frame_linear_embedding() {
        // Wrap net replaced by a single linear layer embedding
        // (u, v) -> (2u, v, 0, 0, 0, 1): e1 = (2, 0, 0), e2 = (0, 1, 0).
        let mut params = ParamNet::<f64>::init_small(0, 8, 4);
        let mut w = Tensor::zeros(2, 6);
        w.set(0, 0, 2.0);
        w.set(1, 1, 1.0);
        let mut b = Tensor::zeros(1, 6);
        b.set(0, 5, 1.0);
        params.wrap_enc = Mlp {
            layers: vec![LinearParams {
                w: Tensor::zeros(2, 4),
                b: Tensor::zeros(1, 4),
            }],
        };
        // Decoder consumes [features(4); q(2)]: route q through the last two
        // input rows.
        let mut dec_w = Tensor::zeros(6, 6);
        dec_w.set(4, 0, 2.0);
        dec_w.set(5, 1, 1.0);
        params.wrap_dec = Mlp {
            layers: vec![LinearParams { w: dec_w, b }],
        };
        let mut tape = Tape::<f64>::new();
        let ids = params.register(&mut tape);
        let verts = Tensor::from_rows3(&[[0.1, 0.2, 0.0], [0.4, -0.3, 0.1]]);
        let cy = crate::nn::forward_cycle_3d(&mut tape, &ids, &verts);
        let (e1, e2) = differential_frame(&mut tape, &ids, &cy);
        let v1 = tape.value(e1);
        let v2 = tape.value(e2);
        for r in 0..2 {
            assert!((v1.get(r, 0) - 2.0).abs() < 1e-12);
            assert!(v1.get(r, 1).abs() < 1e-12);
            assert!(v1.get(r, 2).abs() < 1e-12);
            assert!(v2.get(r, 0).abs() < 1e-12);
            assert!((v2.get(r, 1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tdl_zero_on_isometric_flattening() {
        let (mesh, uv) = synth::flat_grid(5, 1.0);
        let data = TdlData::new(&mesh);
        let mut t = Tape::<f64>::new();
        let q = t.constant(Tensor::from_rows2(&uv));
        let l = tdl(&mut t, q, &data);
        assert!(t.value(l).scalar() < 1e-15);
    }

    #[test]
    fn tdl_uv_scale_invariant() {
        let (mesh, uv) = synth::flat_grid(5, 1.0);
        let data = TdlData::new(&mesh);
        let scaled: Vec<[f64; 2]> = uv.iter().map(|p| [p[0] * 3.7, p[1] * 3.7]).collect();
        let mut t = Tape::<f64>::new();
        let q = t.constant(Tensor::from_rows2(&scaled));
        let l = tdl(&mut t, q, &data);
        assert!(t.value(l).scalar() < 1e-12);
    }

    #[test]
    fn tdl_collapsed_triangle_penalty() {
        let (mesh, uv) = synth::flat_grid(3, 1.0);
        let data = TdlData::new(&mesh);
        let mut broken = uv.clone();
        // Collapse one triangle: move vertex 0 onto vertex 1.
        broken[0] = broken[1];
        let mut t = Tape::<f64>::new();
        let q = t.constant(Tensor::from_rows2(&broken));
        let l = tdl(&mut t, q, &data);
        let nf = mesh.face_count() as f64;
        assert!(t.value(l).scalar() >= 1.0 / nf);
    }
}
