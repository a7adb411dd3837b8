//! Procedurally generated meshes used by the test suite, the acceptance
//! fixtures and the examples: primitives, surfaces of revolution with
//! pronounced thickness variation (dumbbell) and cavity fixtures for the
//! occlusion experiments (bowl, open thick-walled box).

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::geom::Vec3;
use crate::mesh::Mesh;

/// Axis-aligned box centered at the origin.
pub fn box_mesh(wx: f64, wy: f64, wz: f64) -> Mesh {
    let (hx, hy, hz) = (wx / 2.0, wy / 2.0, wz / 2.0);
    let v = vec![
        Vec3::new(-hx, -hy, -hz),
        Vec3::new(hx, -hy, -hz),
        Vec3::new(hx, hy, -hz),
        Vec3::new(-hx, hy, -hz),
        Vec3::new(-hx, -hy, hz),
        Vec3::new(hx, -hy, hz),
        Vec3::new(hx, hy, hz),
        Vec3::new(-hx, hy, hz),
    ];
    // Outward-facing winding.
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2], // z-
        [4, 5, 6],
        [4, 6, 7], // z+
        [0, 1, 5],
        [0, 5, 4], // y-
        [2, 3, 7],
        [2, 7, 6], // y+
        [1, 2, 6],
        [1, 6, 5], // x+
        [3, 0, 4],
        [3, 4, 7], // x-
    ];
    Mesh::new(v, faces).unwrap()
}

/// Unit-style cube with edge length `size`.
pub fn cube(size: f64) -> Mesh {
    box_mesh(size, size, size)
}

/// Cube with flipped winding so normals point inward (a closed room).
pub fn cube_inverted(size: f64) -> Mesh {
    let m = cube(size);
    let faces = m.faces.iter().map(|f| [f[0], f[2], f[1]]).collect();
    Mesh::new(m.vertices, faces).unwrap()
}

pub fn tetrahedron() -> Mesh {
    let v = vec![
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    Mesh::new(v, faces).unwrap()
}

/// Lat-long sphere with pole fans; `n_theta` segments around, `n_phi` rings.
pub fn uv_sphere(radius: f64, n_theta: usize, n_phi: usize) -> Mesh {
    assert!(n_theta >= 3 && n_phi >= 2);
    let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
    for ring in 1..n_phi {
        let phi = PI * ring as f64 / n_phi as f64;
        for seg in 0..n_theta {
            let theta = 2.0 * PI * seg as f64 / n_theta as f64;
            vertices.push(Vec3::new(
                radius * phi.sin() * theta.cos(),
                radius * phi.sin() * theta.sin(),
                radius * phi.cos(),
            ));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -radius));
    let south = vertices.len() as u32 - 1;
    let idx = |ring: usize, seg: usize| 1 + ((ring - 1) * n_theta + seg % n_theta) as u32;

    let mut faces = Vec::new();
    for seg in 0..n_theta {
        faces.push([0, idx(1, seg), idx(1, seg + 1)]);
    }
    for ring in 1..n_phi - 1 {
        for seg in 0..n_theta {
            let a = idx(ring, seg);
            let b = idx(ring, seg + 1);
            let c = idx(ring + 1, seg + 1);
            let d = idx(ring + 1, seg);
            faces.push([a, d, c]);
            faces.push([a, c, b]);
        }
    }
    for seg in 0..n_theta {
        faces.push([south, idx(n_phi - 1, seg + 1), idx(n_phi - 1, seg)]);
    }
    Mesh::new(vertices, faces).unwrap()
}

/// Flat grid in the z = 0 plane spanning `[0, size]^2`, `n x n` vertices.
/// Also returns the isometric UV chart (the plane itself).
pub fn flat_grid(n: usize, size: f64) -> (Mesh, Vec<[f64; 2]>) {
    assert!(n >= 2);
    let mut vertices = Vec::with_capacity(n * n);
    let mut uv = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = size * i as f64 / (n - 1) as f64;
            let y = size * j as f64 / (n - 1) as f64;
            vertices.push(Vec3::new(x, y, 0.0));
            uv.push([x, y]);
        }
    }
    let at = |i: usize, j: usize| (j * n + i) as u32;
    let mut faces = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    (Mesh::new(vertices, faces).unwrap(), uv)
}

/// Open cylinder around the z axis with an isometric unroll as UV.
///
/// With `duplicate_seam` the column at theta = 0 is duplicated so the chart is
/// a proper rectangle (conformality exactly 1). Without it the UV wraps at the
/// shared column, producing a known seam line for seam-detection tests.
pub fn cylinder(
    radius: f64,
    height: f64,
    n_theta: usize,
    n_z: usize,
    duplicate_seam: bool,
) -> (Mesh, Vec<[f64; 2]>) {
    assert!(n_theta >= 3 && n_z >= 1);
    let cols = if duplicate_seam { n_theta + 1 } else { n_theta };
    let mut vertices = Vec::new();
    let mut uv = Vec::new();
    for j in 0..=n_z {
        let z = height * j as f64 / n_z as f64;
        for i in 0..cols {
            let theta = 2.0 * PI * (i % (n_theta + 1)) as f64 / n_theta as f64;
            let theta = if duplicate_seam {
                2.0 * PI * i as f64 / n_theta as f64
            } else {
                theta
            };
            vertices.push(Vec3::new(radius * theta.cos(), radius * theta.sin(), z));
            uv.push([radius * theta, z]);
        }
    }
    let at = |i: usize, j: usize| (j * cols + i % cols) as u32;
    let mut faces = Vec::new();
    let span = if duplicate_seam { n_theta } else { n_theta };
    for j in 0..n_z {
        for i in 0..span {
            let (a, b) = if duplicate_seam {
                (i, i + 1)
            } else {
                (i, (i + 1) % n_theta)
            };
            faces.push([at(a, j), at(b, j), at(b, j + 1)]);
            faces.push([at(a, j), at(b, j + 1), at(a, j + 1)]);
        }
    }
    (Mesh::new(vertices, faces).unwrap(), uv)
}

/// Revolves a (z, r) polyline around the z axis. Endpoints with r = 0 become
/// pole vertices with triangle fans; otherwise the surface is left open there.
pub fn lathe(profile: &[(f64, f64)], n_theta: usize) -> Mesh {
    assert!(profile.len() >= 2 && n_theta >= 3);
    let mut vertices = Vec::new();
    let mut ring_start = Vec::new(); // per profile sample: vertex index or pole marker
    for &(z, r) in profile {
        if r <= 1e-12 {
            ring_start.push((vertices.len() as u32, true));
            vertices.push(Vec3::new(0.0, 0.0, z));
        } else {
            ring_start.push((vertices.len() as u32, false));
            for seg in 0..n_theta {
                let theta = 2.0 * PI * seg as f64 / n_theta as f64;
                vertices.push(Vec3::new(r * theta.cos(), r * theta.sin(), z));
            }
        }
    }
    let mut faces = Vec::new();
    for w in 0..profile.len() - 1 {
        let (a0, a_pole) = ring_start[w];
        let (b0, b_pole) = ring_start[w + 1];
        match (a_pole, b_pole) {
            (true, true) => {} // degenerate segment
            (true, false) => {
                for seg in 0..n_theta {
                    let s1 = (seg + 1) % n_theta;
                    faces.push([a0, b0 + seg as u32, b0 + s1 as u32]);
                }
            }
            (false, true) => {
                for seg in 0..n_theta {
                    let s1 = (seg + 1) % n_theta;
                    faces.push([b0, a0 + s1 as u32, a0 + seg as u32]);
                }
            }
            (false, false) => {
                for seg in 0..n_theta {
                    let s1 = (seg + 1) % n_theta;
                    let (a, b) = (a0 + seg as u32, a0 + s1 as u32);
                    let (c, d) = (b0 + seg as u32, b0 + s1 as u32);
                    faces.push([a, b, d]);
                    faces.push([a, d, c]);
                }
            }
        }
    }
    Mesh::new(vertices, faces).unwrap()
}

/// Two bulbs joined by a thin neck: a closed surface of revolution whose
/// local thickness is strongly bimodal (bulb diameter 1.6, neck 0.5).
pub fn dumbbell(n_theta: usize, n_z: usize) -> Mesh {
    let bulb = |u: f64| (0.64 - u * u).max(0.0).sqrt();
    let r = |z: f64| {
        let mut r = bulb(z - 1.2).max(bulb(z + 1.2));
        if z.abs() <= 1.0 {
            r = r.max(0.25);
        }
        r
    };
    let mut profile = Vec::new();
    for k in 0..=n_z {
        let z = -2.0 + 4.0 * k as f64 / n_z as f64;
        profile.push((z, r(z)));
    }
    lathe(&profile, n_theta)
}

/// Faces of [`dumbbell`] that lie on the neck cylinder, by construction.
pub fn dumbbell_neck_faces(mesh: &Mesh) -> Vec<bool> {
    (0..mesh.face_count())
        .map(|f| {
            let c = mesh.face_centroid(f);
            let rad = (c.x * c.x + c.y * c.y).sqrt();
            c.z.abs() < 0.42 && rad < 0.3
        })
        .collect()
}

/// A thick-walled hemispherical bowl (closed manifold). The inner surface is
/// a deep pocket: strongly occluded, while the outer shell stays exposed.
pub fn bowl(n_theta: usize, n_arc: usize) -> Mesh {
    let mut profile = Vec::new();
    // Outer shell: pole at the bottom up to the rim.
    for k in 0..=n_arc {
        let phi = PI / 2.0 * k as f64 / n_arc as f64; // 0 at pole
        profile.push((-phi.cos(), phi.sin()));
    }
    // Rim: flat ring from r = 1 to r = 0.65 at z = 0.
    profile.push((0.0, 0.825));
    profile.push((0.0, 0.65));
    // Inner shell back down to the inner pole.
    for k in (0..=n_arc).rev() {
        let phi = PI / 2.0 * k as f64 / n_arc as f64;
        profile.push((-0.65 * phi.cos(), 0.65 * phi.sin()));
    }
    lathe(&profile, n_theta)
}

/// Open box with wall thickness: outer shell, inner cavity walls and a flat
/// rim. Closed manifold; the cavity interior is heavily occluded.
pub fn open_box(n: usize) -> Mesh {
    let outer = 1.0;
    let inner = 0.7;
    let depth = 1.2; // outer height
    let floor = 0.25; // cavity floor height above outer bottom
    let mut b = MeshBuilder::new();

    let o = outer;
    let i = inner;
    // Outer bottom (z = 0), normal down.
    b.patch(n, n, |u, v| Vec3::new(-o + 2.0 * o * u, -o + 2.0 * o * v, 0.0), true);
    // Outer walls up to z = depth.
    b.patch(n, n, |u, v| Vec3::new(-o + 2.0 * o * u, -o, depth * v), false);
    b.patch(n, n, |u, v| Vec3::new(-o + 2.0 * o * u, o, depth * v), true);
    b.patch(n, n, |u, v| Vec3::new(-o, -o + 2.0 * o * u, depth * v), true);
    b.patch(n, n, |u, v| Vec3::new(o, -o + 2.0 * o * u, depth * v), false);
    // Rim at z = depth between outer and inner squares.
    b.patch(n, 2, |u, v| {
        let t = i + (o - i) * v;
        Vec3::new(-t + 2.0 * t * u, -t, depth)
    }, true);
    b.patch(n, 2, |u, v| {
        let t = i + (o - i) * v;
        Vec3::new(-t + 2.0 * t * u, t, depth)
    }, false);
    b.patch(n, 2, |u, v| {
        let t = i + (o - i) * v;
        Vec3::new(-t, -t + 2.0 * t * u, depth)
    }, false);
    b.patch(n, 2, |u, v| {
        let t = i + (o - i) * v;
        Vec3::new(t, -t + 2.0 * t * u, depth)
    }, true);
    // Inner cavity walls down to the cavity floor, normals facing the cavity.
    b.patch(n, n, |u, v| Vec3::new(-i + 2.0 * i * u, -i, floor + (depth - floor) * v), true);
    b.patch(n, n, |u, v| Vec3::new(-i + 2.0 * i * u, i, floor + (depth - floor) * v), false);
    b.patch(n, n, |u, v| Vec3::new(-i, -i + 2.0 * i * u, floor + (depth - floor) * v), false);
    b.patch(n, n, |u, v| Vec3::new(i, -i + 2.0 * i * u, floor + (depth - floor) * v), true);
    // Cavity floor (z = floor), normal up.
    b.patch(n, n, |u, v| Vec3::new(-i + 2.0 * i * u, -i + 2.0 * i * v, floor), false);
    b.build()
}

/// Thin slab: a flat box of thickness `t` and side `w` (z is the thin axis).
pub fn slab(w: f64, t: f64) -> Mesh {
    box_mesh(w, w, t)
}

/// Collects triangles from parametric patches and welds bit-identical
/// vertices, so adjoining patches stitch into a manifold.
struct MeshBuilder {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    dedup: HashMap<(u64, u64, u64), u32>,
}

impl MeshBuilder {
    fn new() -> MeshBuilder {
        MeshBuilder {
            vertices: Vec::new(),
            faces: Vec::new(),
            dedup: HashMap::new(),
        }
    }

    fn vertex(&mut self, p: Vec3) -> u32 {
        let key = (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
        if let Some(&i) = self.dedup.get(&key) {
            return i;
        }
        let i = self.vertices.len() as u32;
        self.vertices.push(p);
        self.dedup.insert(key, i);
        i
    }

    /// An `nu x nv` grid of quads over the unit parameter square.
    fn patch(&mut self, nu: usize, nv: usize, f: impl Fn(f64, f64) -> Vec3, flip: bool) {
        let at = |k: usize, n: usize| k as f64 / n as f64;
        for jv in 0..nv {
            for iu in 0..nu {
                let p00 = self.vertex(f(at(iu, nu), at(jv, nv)));
                let p10 = self.vertex(f(at(iu + 1, nu), at(jv, nv)));
                let p11 = self.vertex(f(at(iu + 1, nu), at(jv + 1, nv)));
                let p01 = self.vertex(f(at(iu, nu), at(jv + 1, nv)));
                if flip {
                    self.faces.push([p00, p11, p10]);
                    self.faces.push([p00, p01, p11]);
                } else {
                    self.faces.push([p00, p10, p11]);
                    self.faces.push([p00, p11, p01]);
                }
            }
        }
    }

    fn build(self) -> Mesh {
        Mesh::new(self.vertices, self.faces).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::face_adjacency;

    fn assert_closed(mesh: &Mesh) {
        let adj = face_adjacency(mesh);
        assert!(adj.non_manifold_edges.is_empty());
        assert_eq!(adj.face_pairs.len(), mesh.face_count() * 3 / 2);
    }

    #[test]
    fn primitives_are_closed_manifolds() {
        assert_closed(&cube(1.0));
        assert_closed(&tetrahedron());
        assert_closed(&uv_sphere(1.0, 12, 8));
        assert_closed(&dumbbell(12, 32));
        assert_closed(&bowl(12, 6));
        assert_closed(&open_box(3));
        assert_closed(&slab(4.0, 0.2));
    }

    #[test]
    fn sphere_vertices_on_sphere() {
        let m = uv_sphere(2.0, 16, 9);
        for v in &m.vertices {
            assert!((v.norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dumbbell_has_neck_faces() {
        let m = dumbbell(14, 40);
        let neck = dumbbell_neck_faces(&m);
        let count = neck.iter().filter(|&&b| b).count();
        assert!(count > 0 && count < m.face_count() / 2);
    }

    #[test]
    fn cylinder_chart_is_isometric() {
        let (m, uv) = cylinder(1.0, 2.0, 16, 4, true);
        // Every face preserves edge lengths between 3D and UV.
        for f in &m.faces {
            for k in 0..3 {
                let (a, b) = (f[k] as usize, f[(k + 1) % 3] as usize);
                let d3 = (m.vertices[a] - m.vertices[b]).norm();
                let duv = {
                    let dx = uv[a][0] - uv[b][0];
                    let dy = uv[a][1] - uv[b][1];
                    (dx * dx + dy * dy).sqrt()
                };
                // Chordal vs arc-length differ slightly; tolerance is loose
                // but catches wiring mistakes.
                assert!((d3 - duv).abs() / d3.max(1e-12) < 0.05);
            }
        }
    }
}
