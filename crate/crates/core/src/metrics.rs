//! Evaluation metrics: hard seam detection, mean seam exposure, conformality,
//! equiareality, Hamming distance under optimal label matching, Rand index,
//! and the aggregated report.

use serde::{Deserialize, Serialize};

use crate::geom::{corner_angle, triangle_area, Vec3};
use crate::mesh::{Adjacency, Mesh};
use crate::{Error, Result};

/// Aggregated evaluation results; serialized as the CLI's report.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub conformality: f64,
    pub equiareality: f64,
    pub mean_seam_ao: Option<f64>,
    pub seam_vertex_count: usize,
    /// 20-bin densities over [0, 1] for seam vertices and all vertices.
    pub histogram: Option<AoHistogram>,
    pub hamming: Option<f64>,
    pub rand_index: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AoHistogram {
    pub bins: usize,
    pub seam: Vec<f64>,
    pub all: Vec<f64>,
}

pub const HISTOGRAM_BINS: usize = 20;

/// Density histogram over [0, 1]; bins sum to one when `values` is nonempty.
pub fn density_histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0f64; bins];
    if values.is_empty() {
        return h;
    }
    for &v in values {
        let b = ((v * bins as f64) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    for b in &mut h {
        *b /= values.len() as f64;
    }
    h
}

/// Hard seam mask: a vertex is a seam vertex iff its maximum 1-ring UV
/// distance exceeds `tau_scale` times the UV bounding-square side.
pub fn seam_vertices_hard(
    adjacency: &Adjacency,
    uv: &[[f64; 2]],
    tau_scale: f64,
) -> Vec<bool> {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in uv {
        for c in 0..2 {
            min[c] = min[c].min(p[c]);
            max[c] = max[c].max(p[c]);
        }
    }
    let side = (max[0] - min[0]).max(max[1] - min[1]).max(0.0);
    let tau = tau_scale * side;
    adjacency
        .vertex_one_rings
        .iter()
        .enumerate()
        .map(|(i, ring)| {
            let mut dmax = 0.0f64;
            for &j in ring {
                let dx = uv[i][0] - uv[j as usize][0];
                let dy = uv[i][1] - uv[j as usize][1];
                dmax = dmax.max((dx * dx + dy * dy).sqrt());
            }
            dmax > tau
        })
        .collect()
}

/// Mean AO (exposure) over masked vertices; `None` when the mask is empty.
pub fn mean_seam_ao(mask: &[bool], ao: &[f64]) -> Option<f64> {
    assert_eq!(mask.len(), ao.len());
    let mut sum = 0.0;
    let mut count = 0usize;
    for (&m, &a) in mask.iter().zip(ao) {
        if m {
            sum += a;
            count += 1;
        }
    }
    if count == 0 {
        None
    } else {
        Some(sum / count as f64)
    }
}

fn uv3(p: [f64; 2]) -> Vec3 {
    Vec3::new(p[0], p[1], 0.0)
}

/// Angle preservation in [0, 1]: 3D-area-weighted mean over faces of the mean
/// corner ratio min(theta_uv/theta_3d, theta_3d/theta_uv). Degenerate UV
/// triangles score zero.
pub fn conformality(mesh: &Mesh, uv: &[[f64; 2]]) -> f64 {
    assert_eq!(uv.len(), mesh.vertex_count());
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for (f, face) in mesh.faces.iter().enumerate() {
        let w = mesh.face_area(f);
        wsum += w;
        let (a3, b3, c3) = (
            mesh.vertices[face[0] as usize],
            mesh.vertices[face[1] as usize],
            mesh.vertices[face[2] as usize],
        );
        let (a2, b2, c2) = (
            uv3(uv[face[0] as usize]),
            uv3(uv[face[1] as usize]),
            uv3(uv[face[2] as usize]),
        );
        if triangle_area(a2, b2, c2) < 1e-12 {
            continue; // scores zero
        }
        let mut face_score = 0.0;
        for (p3, q3, r3, p2, q2, r2) in [
            (a3, b3, c3, a2, b2, c2),
            (b3, c3, a3, b2, c2, a2),
            (c3, a3, b3, c2, a2, b2),
        ] {
            let t3 = corner_angle(p3, q3, r3);
            let t2 = corner_angle(p2, q2, r2);
            if t3 <= 0.0 || t2 <= 0.0 {
                continue;
            }
            face_score += (t2 / t3).min(t3 / t2);
        }
        acc += w * face_score / 3.0;
    }
    if wsum > 0.0 {
        acc / wsum
    } else {
        0.0
    }
}

/// Area preservation in [0, 1]: with normalized per-face areas a (3D) and
/// a_hat (UV), the 3D-area-weighted mean of min(a_hat/a, a/a_hat).
pub fn equiareality(mesh: &Mesh, uv: &[[f64; 2]]) -> f64 {
    assert_eq!(uv.len(), mesh.vertex_count());
    let n = mesh.face_count();
    let mut a3 = Vec::with_capacity(n);
    let mut a2 = Vec::with_capacity(n);
    for face in &mesh.faces {
        let (p, q, r) = (
            mesh.vertices[face[0] as usize],
            mesh.vertices[face[1] as usize],
            mesh.vertices[face[2] as usize],
        );
        a3.push(triangle_area(p, q, r));
        a2.push(triangle_area(
            uv3(uv[face[0] as usize]),
            uv3(uv[face[1] as usize]),
            uv3(uv[face[2] as usize]),
        ));
    }
    let t3: f64 = a3.iter().sum();
    let t2: f64 = a2.iter().sum();
    if t3 <= 0.0 || t2 <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for f in 0..n {
        let w = a3[f] / t3;
        let ahat = a2[f] / t2;
        let a = a3[f] / t3;
        if ahat < 1e-15 || a < 1e-15 {
            continue; // degenerate scores zero
        }
        acc += w * (ahat / a).min(a / ahat);
    }
    acc
}

fn contingency(labels_a: &[u32], labels_b: &[u32]) -> (Vec<Vec<usize>>, usize, usize) {
    let ka = labels_a.iter().copied().max().map_or(0, |m| m as usize + 1);
    let kb = labels_b.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        table[a as usize][b as usize] += 1;
    }
    (table, ka, kb)
}

/// Fraction of elements whose labels disagree after the best one-to-one label
/// correspondence (exact rectangular assignment).
pub fn hamming_matched(labels_a: &[u32], labels_b: &[u32]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::Evaluation(
            "labelings must have equal length".into(),
        ));
    }
    if labels_a.is_empty() {
        return Err(Error::Evaluation("empty labelings".into()));
    }
    let (table, ka, kb) = contingency(labels_a, labels_b);
    let dim = ka.max(kb);
    // Maximize matched agreement; pad to square with zeros.
    let mut gain = vec![vec![0i64; dim]; dim];
    for (i, row) in table.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            gain[i][j] = v as i64;
        }
    }
    let matched = hungarian_max(&gain);
    Ok(1.0 - matched as f64 / labels_a.len() as f64)
}

/// Pairwise agreement between two labelings via the contingency-table
/// formula.
pub fn rand_index(labels_a: &[u32], labels_b: &[u32]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::Evaluation(
            "labelings must have equal length".into(),
        ));
    }
    let n = labels_a.len();
    if n < 2 {
        return Err(Error::Evaluation("rand index needs >= 2 elements".into()));
    }
    let (table, _, _) = contingency(labels_a, labels_b);
    let choose2 = |x: usize| (x * x.saturating_sub(1) / 2) as f64;
    let total = choose2(n);
    let mut sum_ij = 0.0;
    let mut sum_a = 0.0;
    let mut sum_b = vec![0usize; table.first().map_or(0, |r| r.len())];
    for row in &table {
        let ra: usize = row.iter().sum();
        sum_a += choose2(ra);
        for (j, &v) in row.iter().enumerate() {
            sum_ij += choose2(v);
            sum_b[j] += v;
        }
    }
    let sum_b: f64 = sum_b.into_iter().map(choose2).sum();
    // together-together + apart-apart agreements.
    let agree = 2.0 * sum_ij + total - sum_a - sum_b;
    Ok(agree / total)
}

/// Hungarian algorithm maximizing the total gain of a square matrix.
fn hungarian_max(gain: &[Vec<i64>]) -> i64 {
    let n = gain.len();
    if n == 0 {
        return 0;
    }
    let max_entry = gain
        .iter()
        .flat_map(|r| r.iter().copied())
        .max()
        .unwrap_or(0);
    // Convert to min-cost assignment.
    let cost: Vec<Vec<i64>> = gain
        .iter()
        .map(|row| row.iter().map(|&g| max_entry - g).collect())
        .collect();

    // O(n^3) potentials formulation (1-indexed helpers).
    let inf = i64::MAX / 2;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0i64;
    for j in 1..=n {
        if p[j] != 0 {
            total += gain[p[j] - 1][j - 1];
        }
    }
    total
}

/// Builds the full report for a UV-mapped mesh.
pub fn evaluate(
    mesh: &Mesh,
    adjacency: &Adjacency,
    uv: &[[f64; 2]],
    ao: Option<&[f64]>,
    tau_scale: f64,
    labels: Option<(&[u32], &[u32])>,
) -> Result<MetricReport> {
    let mask = seam_vertices_hard(adjacency, uv, tau_scale);
    let seam_vertex_count = mask.iter().filter(|&&m| m).count();
    let (mean_ao, histogram) = match ao {
        Some(ao) => {
            let seam_values: Vec<f64> = mask
                .iter()
                .zip(ao)
                .filter(|(&m, _)| m)
                .map(|(_, &a)| a)
                .collect();
            (
                mean_seam_ao(&mask, ao),
                Some(AoHistogram {
                    bins: HISTOGRAM_BINS,
                    seam: density_histogram(&seam_values, HISTOGRAM_BINS),
                    all: density_histogram(ao, HISTOGRAM_BINS),
                }),
            )
        }
        None => (None, None),
    };
    let (hamming, ri) = match labels {
        Some((a, b)) => (Some(hamming_matched(a, b)?), Some(rand_index(a, b)?)),
        None => (None, None),
    };
    Ok(MetricReport {
        conformality: conformality(mesh, uv),
        equiareality: equiareality(mesh, uv),
        mean_seam_ao: mean_ao,
        seam_vertex_count,
        histogram,
        hamming,
        rand_index: ri,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::face_adjacency;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_embedding_no_seams() {
        let (mesh, uv) = synth::flat_grid(6, 1.0);
        let adjacency = face_adjacency(&mesh);
        let mask = seam_vertices_hard(&adjacency, &uv, 0.5);
        assert!(mask.iter().all(|&m| !m));
    }

    #[test]
    fn cylinder_seam_column_detected() {
        let (mesh, uv) = synth::cylinder(1.0, 2.0, 24, 6, false);
        let adjacency = face_adjacency(&mesh);
        let mask = seam_vertices_hard(&adjacency, &uv, 0.1);
        // Oracle: by construction the wrap discontinuity sits at the theta=0
        // column; its vertices and their ring neighbors see a huge UV jump.
        for (i, &m) in mask.iter().enumerate() {
            let v = mesh.vertices[i];
            let theta = v.y.atan2(v.x).rem_euclid(2.0 * std::f64::consts::PI);
            let col = (theta / (2.0 * std::f64::consts::PI) * 24.0).round() as usize % 24;
            // Only the shared column and its wrap-around neighbor see the
            // discontinuity in their rings.
            let near_seam = col == 0 || col == 23;
            assert_eq!(m, near_seam, "vertex {i} at column {col}");
        }
    }

    #[test]
    fn hard_mask_is_soft_limit() {
        let (mesh, uv) = synth::cylinder(1.0, 2.0, 16, 4, false);
        let adjacency = face_adjacency(&mesh);
        let mask = seam_vertices_hard(&adjacency, &uv, 0.1);
        let rings = crate::loss::RingIndex::from_adjacency(&adjacency);
        let cfg = crate::loss::SeamConfig {
            beta: 1e6,
            gamma: 1e7,
            tau_scale: 0.1,
            neighbor_count: 8,
        };
        let scores = crate::loss::seam_scores_values(&uv, &rings, &cfg);
        let mut agree = 0usize;
        for (i, &m) in mask.iter().enumerate() {
            if (scores.s[i] > 0.5) == m {
                agree += 1;
            }
        }
        assert!(agree as f64 / mask.len() as f64 >= 0.999);
    }

    #[test]
    fn mean_seam_ao_cases() {
        let mask = vec![true, false, true];
        let v = mean_seam_ao(&mask, &[0.2, 0.9, 0.4]).unwrap();
        assert!((v - 0.3).abs() < 1e-12);
        let empty = vec![false; 3];
        assert_eq!(mean_seam_ao(&empty, &[0.2, 0.9, 0.4]), None);
        let all = vec![true; 3];
        let c = 0.77;
        assert_eq!(mean_seam_ao(&all, &[c, c, c]), Some(c));
        // Bounded by field extrema.
        let v = mean_seam_ao(&mask, &[0.2, 0.9, 0.4]).unwrap();
        assert!(v >= 0.2 && v <= 0.9);
    }

    #[test]
    fn conformality_isometric_is_one() {
        let (mesh, uv) = synth::flat_grid(5, 2.0);
        assert!((conformality(&mesh, &uv) - 1.0).abs() < 1e-9);
        // Scale invariance.
        let scaled: Vec<[f64; 2]> = uv.iter().map(|p| [p[0] * 9.0, p[1] * 9.0]).collect();
        assert!((conformality(&mesh, &scaled) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conformality_shear_closed_form() {
        // 2:1 anisotropic scale of the unit right triangle.
        let mesh = Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let uv = vec![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        // 3D angles: 90, 45, 45. UV angles: 90, atan(1/2), 90 - atan(1/2).
        let a = (0.5f64).atan();
        let t45 = std::f64::consts::FRAC_PI_4;
        let expected = (1.0 + (a / t45) + ((std::f64::consts::FRAC_PI_2 - a) / t45).recip()) / 3.0;
        let got = conformality(&mesh, &uv);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn equiareality_cases() {
        let (mesh, uv) = synth::flat_grid(4, 1.0);
        assert!((equiareality(&mesh, &uv) - 1.0).abs() < 1e-9);
        let scaled: Vec<[f64; 2]> = uv.iter().map(|p| [p[0] * 3.0, p[1] * 3.0]).collect();
        assert!((equiareality(&mesh, &scaled) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equiareality_direct_formula() {
        // Two equal 3D triangles; UV doubles the relative area of the first.
        let mesh = Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let uv = vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 1.0]];
        // UV areas: first 2.0, second 1.0; normalized {2/3, 1/3} vs {1/2, 1/2}.
        let r1: f64 = (2.0 / 3.0) / 0.5;
        let r2: f64 = (1.0 / 3.0) / 0.5;
        let expected = 0.5 * r1.recip() + 0.5 * r2;
        assert!((equiareality(&mesh, &uv) - expected).abs() < 1e-12);
    }

    #[test]
    fn hamming_identity_and_permutation() {
        let a = vec![0, 0, 1, 1, 2, 2];
        assert_eq!(hamming_matched(&a, &a).unwrap(), 0.0);
        let permuted = vec![2, 2, 0, 0, 1, 1];
        assert_eq!(hamming_matched(&a, &permuted).unwrap(), 0.0);
    }

    #[test]
    fn hamming_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..=12);
            let a: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let got = hamming_matched(&a, &b).unwrap();
            // Exhaustive: minimum disagreement over all bijections of the
            // 3-label alphabet.
            let perms = [
                [0u32, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            let mut best = usize::MAX;
            for perm in &perms {
                let dis = a
                    .iter()
                    .zip(&b)
                    .filter(|(&x, &y)| perm[x as usize] != y)
                    .count();
                best = best.min(dis);
            }
            let expect = best as f64 / n as f64;
            assert!(
                (got - expect).abs() < 1e-12,
                "a {a:?} b {b:?}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn rand_index_cases() {
        let a = vec![0u32, 0, 1, 1];
        assert_eq!(rand_index(&a, &a).unwrap(), 1.0);
        let same = vec![0u32, 0, 0, 0];
        let distinct = vec![0u32, 1, 2, 3];
        assert_eq!(rand_index(&same, &distinct).unwrap(), 0.0);
        assert!(rand_index(&a[..1], &a[..1]).is_err());
    }

    #[test]
    fn rand_index_matches_pair_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let n = rng.random_range(2..=12);
            let a: Vec<u32> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let b: Vec<u32> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let got = rand_index(&a, &b).unwrap();
            let mut agree = 0usize;
            let mut total = 0usize;
            for i in 0..n as usize {
                for j in i + 1..n as usize {
                    total += 1;
                    let ta = a[i] == a[j];
                    let tb = b[i] == b[j];
                    if ta == tb {
                        agree += 1;
                    }
                }
            }
            assert!((got - agree as f64 / total as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_density_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vals: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..1.0)).collect();
        let h = density_histogram(&vals, HISTOGRAM_BINS);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(h.len(), 20);
    }
}
