//! Chamfer, wrap, cycle-consistency and repulsion objectives.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::nn::{NodeId, Scalar, Tape, Tensor};

/// Nearest-neighbor index from each row of `a` into `b` (brute force; rows are
/// independent so the result is thread-count invariant).
pub fn nearest_neighbor_indices<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Vec<u32> {
    assert_eq!(a.cols, b.cols);
    let cols = a.cols;
    (0..a.rows)
        .into_par_iter()
        .map(|i| {
            let ar = a.row(i);
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for j in 0..b.rows {
                let br = b.row(j);
                let mut d = 0.0f64;
                for c in 0..cols {
                    let diff = ar[c].to_f64() - br[c].to_f64();
                    d += diff * diff;
                }
                if d < best_d {
                    best_d = d;
                    best = j as u32;
                }
            }
            best
        })
        .collect()
}

/// Symmetric chamfer distance between two point-set nodes: mean over each set
/// of the squared distance to the nearest point of the other. Also returns
/// the forward correspondence (rows of `a` -> rows of `b`).
pub fn chamfer<S: Scalar>(tape: &mut Tape<S>, a: NodeId, b: NodeId) -> (NodeId, Rc<Vec<u32>>) {
    let nn_ab = Rc::new(nearest_neighbor_indices(tape.value(a), tape.value(b)));
    let nn_ba = Rc::new(nearest_neighbor_indices(tape.value(b), tape.value(a)));

    let b_for_a = tape.gather_rows(b, nn_ab.clone());
    let d1 = tape.sub(a, b_for_a);
    let d1 = tape.row_sq_norm(d1);
    let m1 = tape.mean_all(d1);

    let a_for_b = tape.gather_rows(a, nn_ba);
    let d2 = tape.sub(a_for_b, b);
    let d2 = tape.row_sq_norm(d2);
    let m2 = tape.mean_all(d2);

    (tape.add(m1, m2), nn_ab)
}

/// Plain-value chamfer for small point sets (test oracle support).
pub fn chamfer_points(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let min_sq = |p: &[f64; 3], set: &[[f64; 3]]| {
        set.iter()
            .map(|q| {
                let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
            })
            .fold(f64::INFINITY, f64::min)
    };
    let m1: f64 = a.iter().map(|p| min_sq(p, b)).sum::<f64>() / a.len() as f64;
    let m2: f64 = b.iter().map(|p| min_sq(p, a)).sum::<f64>() / b.len() as f64;
    m1 + m2
}

/// Wrap objective: chamfer(p_hat, P) plus `kappa` times one minus the mean
/// cosine similarity between predicted normals and the normal of each
/// prediction's nearest reference point.
pub fn wrap_loss<S: Scalar>(
    tape: &mut Tape<S>,
    p_hat: NodeId,
    n_hat: NodeId,
    p_ref: NodeId,
    n_ref: NodeId,
    kappa_norm: f64,
    eps: f64,
) -> NodeId {
    let (cham, nn_ab) = chamfer(tape, p_hat, p_ref);
    if kappa_norm == 0.0 {
        return cham;
    }
    let paired = tape.gather_rows(n_ref, nn_ab);
    let cos = tape.cosine_rows(n_hat, paired, S::from_f64(eps));
    let mean_cos = tape.mean_all(cos);
    let one = tape.scalar_const(S::ONE);
    let norm_term = tape.sub(one, mean_cos);
    let scaled = tape.scale(norm_term, S::from_f64(kappa_norm));
    tape.add(cham, scaled)
}

/// Cycle-consistency terms: position (both branches) and normal agreement.
pub fn cycle_loss<S: Scalar>(
    tape: &mut Tape<S>,
    q_hat: NodeId,
    q_hat_cycle: NodeId,
    p_ref: NodeId,
    p_tilde: NodeId,
    n_ref: NodeId,
    n_tilde: NodeId,
    eps: f64,
) -> (NodeId, NodeId) {
    let d2d = tape.sub(q_hat, q_hat_cycle);
    let d2d = tape.row_sq_norm(d2d);
    let m2d = tape.mean_all(d2d);
    let d3d = tape.sub(p_ref, p_tilde);
    let d3d = tape.row_sq_norm(d3d);
    let m3d = tape.mean_all(d3d);
    let pos = tape.add(m2d, m3d);

    let cos = tape.cosine_rows(n_ref, n_tilde, S::from_f64(eps));
    let mean_cos = tape.mean_all(cos);
    let one = tape.scalar_const(S::ONE);
    let norm = tape.sub(one, mean_cos);
    (pos, norm)
}

/// Hinge repulsion over sampled nearest UV pairs. `q` must already be
/// normalized to the unit square. Each vertex is paired with its nearest
/// neighbor among `pair_budget` random candidates (or among all other
/// vertices when the budget covers them).
pub fn repulsion_loss<S: Scalar>(
    tape: &mut Tape<S>,
    q: NodeId,
    margin: f64,
    pair_budget: usize,
    rng: &mut ChaCha8Rng,
) -> NodeId {
    let qv = tape.value(q);
    let n = qv.rows;
    if n < 2 {
        return tape.scalar_const(S::ZERO);
    }
    let mut partner = Vec::with_capacity(n);
    let dist_sq = |qv: &Tensor<S>, i: usize, j: usize| {
        let (a, b) = (qv.row(i), qv.row(j));
        let mut d = 0.0f64;
        for c in 0..qv.cols {
            let diff = a[c].to_f64() - b[c].to_f64();
            d += diff * diff;
        }
        d
    };
    if pair_budget >= n - 1 {
        for i in 0..n {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = dist_sq(qv, i, j);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            partner.push(best as u32);
        }
    } else {
        for i in 0..n {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for _ in 0..pair_budget {
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let d = dist_sq(qv, i, j);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            partner.push(best as u32);
        }
    }
    debug_assert!(partner.iter().all(|&p| (p as usize) < n));
    let gathered = tape.gather_rows(q, Rc::new(partner));
    let diff = tape.sub(q, gathered);
    let d = tape.row_norm(diff, S::from_f64(1e-20));
    let neg = tape.neg(d);
    let slack = tape.add_const(neg, S::from_f64(margin));
    let hinge = tape.relu(slack);
    let sq = tape.square(hinge);
    tape.mean_all(sq)
}

/// Default repulsion margin for a mesh with `n_vertices` vertices.
pub fn default_repulsion_margin(n_vertices: usize) -> f64 {
    0.5 / (n_vertices.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tensor3(rows: &[[f64; 3]]) -> Tensor<f64> {
        Tensor::from_rows3(rows)
    }

    #[test]
    fn chamfer_identical_sets_zero() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [-1.0, 0.5, 0.2]];
        let mut t = Tape::<f64>::new();
        let a = t.constant(tensor3(&pts));
        let b = t.constant(tensor3(&pts));
        let (c, _) = chamfer(&mut t, a, b);
        assert_eq!(t.value(c).scalar(), 0.0);
    }

    #[test]
    fn chamfer_two_points_closed_form() {
        let mut t = Tape::<f64>::new();
        let a = t.constant(tensor3(&[[0.0, 0.0, 0.0]]));
        let b = t.constant(tensor3(&[[1.0, 0.0, 0.0]]));
        let (c, _) = chamfer(&mut t, a, b);
        assert!((t.value(c).scalar() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mk = |n: usize| -> Vec<[f64; 3]> {
            (0..n)
                .map(|_| {
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect()
        };
        let pa = mk(100);
        let pb = mk(77);
        let mut t = Tape::<f64>::new();
        let a = t.constant(tensor3(&pa));
        let b = t.constant(tensor3(&pb));
        let (c, _) = chamfer(&mut t, a, b);
        let oracle = chamfer_points(&pa, &pb);
        assert!((t.value(c).scalar() - oracle).abs() < 1e-9);
    }

    #[test]
    fn wrap_loss_zero_cases() {
        let pts = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let nrm = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let mut t = Tape::<f64>::new();
        let p = t.constant(tensor3(&pts));
        let n = t.constant(tensor3(&nrm));
        let l = wrap_loss(&mut t, p, n, p, n, 0.1, 0.0);
        assert!(t.value(l).scalar().abs() < 1e-12);

        // Flipped normals cost kappa * 2.
        let flipped: Vec<[f64; 3]> = nrm.iter().map(|v| [-v[0], -v[1], -v[2]]).collect();
        let nf = t.constant(tensor3(&flipped));
        let l2 = wrap_loss(&mut t, p, nf, p, n, 0.1, 0.0);
        assert!((t.value(l2).scalar() - 0.2).abs() < 1e-12);

        // kappa = 0 reduces to pure chamfer.
        let l3 = wrap_loss(&mut t, p, nf, p, n, 0.0, 0.0);
        assert_eq!(t.value(l3).scalar(), 0.0);
    }

    #[test]
    fn cycle_loss_cases() {
        let mut t = Tape::<f64>::new();
        let q = t.constant(Tensor::from_rows2(&[[0.1, 0.2], [0.6, 0.9]]));
        let p = t.constant(tensor3(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]));
        let n = t.constant(tensor3(&[[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]));
        let (pos, norm) = cycle_loss(&mut t, q, q, p, p, n, n, 1e-9);
        assert_eq!(t.value(pos).scalar(), 0.0);
        // The epsilon-guarded norms keep identical-vector cosine a hair
        // below one.
        assert!(t.value(norm).scalar().abs() < 1e-7);

        // Shift one branch by delta in x.
        let delta = 0.25;
        let p_shift = t.constant(tensor3(&[[delta, 0.0, 0.0], [1.0 + delta, 1.0, 1.0]]));
        let (pos2, _) = cycle_loss(&mut t, q, q, p, p_shift, n, n, 1e-9);
        assert!((t.value(pos2).scalar() - delta * delta).abs() < 1e-12);
    }

    #[test]
    fn repulsion_coincident_equals_margin_sq() {
        let mut t = Tape::<f64>::new();
        let q = t.constant(Tensor::from_rows2(&[[0.3, 0.3]; 10]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = 0.05;
        let l = repulsion_loss(&mut t, q, m, 64, &mut rng);
        assert!((t.value(l).scalar() - m * m).abs() < 1e-6);
    }

    #[test]
    fn repulsion_spread_grid_is_zero() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push([i as f64 * 0.2, j as f64 * 0.2]);
            }
        }
        let mut t = Tape::<f64>::new();
        let q = t.constant(Tensor::from_rows2(&pts));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = repulsion_loss(&mut t, q, 0.2, 64, &mut rng);
        assert!(t.value(l).scalar() < 1e-30);
    }

    #[test]
    fn repulsion_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<[f64; 2]> = (0..150)
            .map(|_| [rng.random_range(0.0..0.2), rng.random_range(0.0..0.2)])
            .collect();
        let m = 0.05;
        let mut t = Tape::<f64>::new();
        let q = t.constant(Tensor::from_rows2(&pts));
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        // Budget covers all points, so the sampled nearest is the true one.
        let l = repulsion_loss(&mut t, q, m, pts.len(), &mut r2);
        // Oracle: true nearest neighbor hinge, averaged.
        let mut acc = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (j, o) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = ((p[0] - o[0]).powi(2) + (p[1] - o[1]).powi(2)).sqrt();
                best = best.min(d);
            }
            acc += (m - best).max(0.0).powi(2);
        }
        let oracle = acc / pts.len() as f64;
        assert!((t.value(l).scalar() - oracle).abs() < 1e-9);
    }
}
