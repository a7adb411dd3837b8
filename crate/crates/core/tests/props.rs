//! Property tests for the cross-cutting invariants.

use proptest::prelude::*;

use uvforge::geom::Vec3;
use uvforge::mesh::{face_adjacency, normalize_mesh, Mesh};
use uvforge::obj::{load_obj, save_obj};
use uvforge::synth;

fn arbitrary_quad_strip(n: usize) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    // Deterministic strip geometry; positions get perturbed by proptest.
    let mut vertices = Vec::new();
    for i in 0..=n {
        vertices.push(Vec3::new(i as f64, 0.0, 0.0));
        vertices.push(Vec3::new(i as f64, 1.0, 0.1 * i as f64));
    }
    let mut faces = Vec::new();
    for i in 0..n as u32 {
        let a = 2 * i;
        faces.push([a, a + 2, a + 3]);
        faces.push([a, a + 3, a + 1]);
    }
    (vertices, faces)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn obj_roundtrip_identity(
        jitter in proptest::collection::vec(-0.4f64..0.4, 12),
        with_uv in any::<bool>(),
    ) {
        let (mut vertices, faces) = arbitrary_quad_strip(5);
        for (v, j) in vertices.iter_mut().zip(jitter.iter().cycle()) {
            v.z += j;
        }
        let mesh = Mesh::new(vertices, faces).unwrap();
        let uv: Option<Vec<[f64; 2]>> = with_uv.then(|| {
            mesh.vertices.iter().map(|v| [v.x * 0.17, v.y * 0.31]).collect()
        });
        let tmp = tempfile::Builder::new().suffix(".obj").tempfile().unwrap();
        save_obj(&mesh, uv.as_deref(), tmp.path()).unwrap();
        let loaded = load_obj(tmp.path()).unwrap();
        prop_assert_eq!(loaded.mesh.face_count(), mesh.face_count());
        for (a, b) in mesh.vertices.iter().zip(&loaded.mesh.vertices) {
            prop_assert!((*a - *b).norm() < 1e-6);
        }
        if let Some(uv) = uv {
            let luv = loaded.uv.unwrap();
            for (a, b) in uv.iter().zip(&luv) {
                prop_assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
            }
        }
        for (a, b) in mesh.faces.iter().zip(&loaded.mesh.faces) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn normalize_similarity_invariant(
        scale in 0.05f64..40.0,
        tx in -10.0f64..10.0,
        ty in -10.0f64..10.0,
        tz in -10.0f64..10.0,
    ) {
        let mesh = synth::dumbbell(8, 16);
        let moved = Mesh::new(
            mesh.vertices
                .iter()
                .map(|&v| v * scale + Vec3::new(tx, ty, tz))
                .collect(),
            mesh.faces.clone(),
        )
        .unwrap();
        let a = normalize_mesh(&mesh).unwrap();
        let b = normalize_mesh(&moved).unwrap();
        for (x, y) in a.vertices.iter().zip(&b.vertices) {
            prop_assert!((*x - *y).norm() < 1e-9);
        }
    }

    #[test]
    fn hamming_invariant_to_label_permutation(
        labels in proptest::collection::vec(0u32..4, 6..40),
        perm_seed in 0u64..24,
    ) {
        // Apply a bijection on the label alphabet to one side.
        let mut perm = [0u32, 1, 2, 3];
        let mut s = perm_seed;
        for i in (1..4).rev() {
            let j = (s % (i as u64 + 1)) as usize;
            perm.swap(i, j);
            s /= 4;
        }
        let permuted: Vec<u32> = labels.iter().map(|&l| perm[l as usize]).collect();
        let h = uvforge::metrics::hamming_matched(&labels, &permuted).unwrap();
        prop_assert!(h.abs() < 1e-12);
        // Symmetry on arbitrary pairs.
        let other: Vec<u32> = labels.iter().rev().copied().collect();
        let ab = uvforge::metrics::hamming_matched(&labels, &other).unwrap();
        let ba = uvforge::metrics::hamming_matched(&other, &labels).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn interior_edge_count_on_closed_meshes(theta in 6usize..14, rings in 4usize..9) {
        let mesh = synth::uv_sphere(1.0, theta, rings);
        let adjacency = face_adjacency(&mesh);
        prop_assert_eq!(adjacency.face_pairs.len(), mesh.face_count() * 3 / 2);
    }
}
