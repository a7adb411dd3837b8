//! Triangle mesh representation, normals, adjacency, submesh extraction and
//! normalization. All types are immutable after construction and safe to share
//! read-only across threads.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::geom::{triangle_area, Aabb, Vec3};
use crate::label::Labeling;
use crate::{Error, Result};

/// A triangle mesh: positions, faces and unit per-vertex normals.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub normals: Vec<Vec3>,
}

impl Mesh {
    /// Builds a mesh and computes area-weighted vertex normals.
    ///
    /// Rejects out-of-range indices and degenerate faces (repeated indices).
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Mesh> {
        let nv = vertices.len() as u32;
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex out of range (|V| = {nv})"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} is degenerate: indices {:?}",
                    f
                )));
            }
        }
        let normals = compute_vertex_normals(&vertices, &faces).0;
        Ok(Mesh {
            vertices,
            faces,
            normals,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn bounding_box(&self) -> Aabb {
        let mut bb = Aabb::empty();
        for &v in &self.vertices {
            bb.grow(v);
        }
        bb
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        (self.vertices[a as usize] + self.vertices[b as usize] + self.vertices[c as usize]) / 3.0
    }

    /// Unit normal of face `f` (zero vector for degenerate geometry).
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        let (a, b, c) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        (b - a).cross(c - a).normalized()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        )
    }

    pub fn total_area(&self) -> f64 {
        (0..self.face_count()).map(|f| self.face_area(f)).sum()
    }
}

/// Area-weighted vertex normals. Returns the normals together with the indices
/// of vertices whose incident faces had zero total area (these receive an
/// arbitrary unit vector).
pub fn compute_vertex_normals(
    vertices: &[Vec3],
    faces: &[[u32; 3]],
) -> (Vec<Vec3>, Vec<u32>) {
    let mut acc = vec![Vec3::ZERO; vertices.len()];
    for f in faces {
        let a = vertices[f[0] as usize];
        let b = vertices[f[1] as usize];
        let c = vertices[f[2] as usize];
        // Cross product length is twice the area, so summing raw cross
        // products is the area weighting.
        let n = (b - a).cross(c - a);
        for &i in f {
            acc[i as usize] += n;
        }
    }
    let mut degenerate = Vec::new();
    let normals = acc
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            if n.norm() < 1e-20 {
                degenerate.push(i as u32);
                Vec3::new(0.0, 0.0, 1.0)
            } else {
                n.normalized()
            }
        })
        .collect();
    (normals, degenerate)
}

/// One interior edge shared by exactly two faces.
#[derive(Debug, Clone, Copy)]
pub struct FacePair {
    pub face_a: u32,
    pub face_b: u32,
    /// Vertex indices of the shared edge, `edge.0 < edge.1`.
    pub edge: (u32, u32),
    /// Interior dihedral angle in `(0, 2pi)`; `pi` means coplanar, smaller is
    /// convex, larger is reflex.
    pub dihedral: f64,
}

/// Vertex one-rings and manifold face adjacency.
#[derive(Debug, Clone)]
pub struct Adjacency {
    /// Sorted neighbor vertex indices per vertex.
    pub vertex_one_rings: Vec<Vec<u32>>,
    pub face_pairs: Vec<FacePair>,
    /// Edges shared by more than two faces, excluded from `face_pairs`.
    pub non_manifold_edges: Vec<(u32, u32)>,
}

impl Adjacency {
    /// Edge-adjacent faces per face, derived from `face_pairs`.
    pub fn face_neighbors(&self, n_faces: usize) -> Vec<Vec<u32>> {
        let mut nb = vec![Vec::new(); n_faces];
        for p in &self.face_pairs {
            nb[p.face_a as usize].push(p.face_b);
            nb[p.face_b as usize].push(p.face_a);
        }
        for l in &mut nb {
            l.sort_unstable();
        }
        nb
    }
}

/// Builds vertex one-rings and face pairs with interior dihedral angles.
///
/// Edges shared by more than two faces are reported as non-manifold and left
/// out of `face_pairs`.
pub fn face_adjacency(mesh: &Mesh) -> Adjacency {
    let mut rings: Vec<Vec<u32>> = vec![Vec::new(); mesh.vertex_count()];
    // (min, max) edge -> list of (face, oriented edge start)
    let mut edges: BTreeMap<(u32, u32), Vec<(u32, u32)>> = BTreeMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let u = f[k];
            let v = f[(k + 1) % 3];
            rings[u as usize].push(v);
            rings[v as usize].push(u);
            let key = (u.min(v), u.max(v));
            edges.entry(key).or_default().push((fi as u32, u));
        }
    }
    for r in &mut rings {
        r.sort_unstable();
        r.dedup();
    }

    let mut face_pairs = Vec::new();
    let mut non_manifold = Vec::new();
    for (&(u, v), fs) in &edges {
        match fs.len() {
            2 => {
                let (fa, start_a) = fs[0];
                let (fb, _) = fs[1];
                let dihedral = interior_dihedral(mesh, fa, fb, u, v, start_a);
                face_pairs.push(FacePair {
                    face_a: fa,
                    face_b: fb,
                    edge: (u, v),
                    dihedral,
                });
            }
            0 | 1 => {}
            _ => non_manifold.push((u, v)),
        }
    }
    Adjacency {
        vertex_one_rings: rings,
        face_pairs,
        non_manifold_edges: non_manifold,
    }
}

/// Interior dihedral angle between two faces across edge (u, v), mapped to
/// `(0, 2pi)` with `pi` meaning coplanar. `start_a` is the edge origin as
/// oriented inside face `a`, which fixes the sign of the bend.
fn interior_dihedral(mesh: &Mesh, fa: u32, fb: u32, u: u32, v: u32, start_a: u32) -> f64 {
    let na = mesh.face_normal(fa as usize);
    let nb = mesh.face_normal(fb as usize);
    let mut e = mesh.vertices[v as usize] - mesh.vertices[u as usize];
    if start_a != u {
        e = -e;
    }
    let e = e.normalized();
    // Signed angle from na to nb about a's oriented edge: positive bend is
    // convex (normals diverging outward), so interior angle is pi - phi.
    let phi = na.cross(nb).dot(e).atan2(na.dot(nb));
    let theta = PI - phi;
    theta.clamp(f64::MIN_POSITIVE, 2.0 * PI - f64::EPSILON)
}

/// Normalizes the mesh: bounding-box center moved to the origin, uniform scale
/// so the bounding-box diagonal equals one. Idempotent and invariant to input
/// similarity transforms.
pub fn normalize_mesh(mesh: &Mesh) -> Result<Mesh> {
    if mesh.vertices.is_empty() {
        return Err(Error::InvalidMesh("cannot normalize empty mesh".into()));
    }
    let bb = mesh.bounding_box();
    let diag = bb.diagonal();
    if diag == 0.0 {
        return Err(Error::InvalidMesh(
            "cannot normalize: all vertices identical".into(),
        ));
    }
    let center = bb.center();
    let vertices = mesh
        .vertices
        .iter()
        .map(|&v| (v - center) / diag)
        .collect();
    Mesh::new(vertices, mesh.faces.clone())
}

/// A submesh together with maps back to the parent mesh.
#[derive(Debug, Clone)]
pub struct SubmeshMap {
    pub submesh: Mesh,
    /// Submesh vertex index -> parent vertex index (injective).
    pub vertex_back_map: Vec<u32>,
    /// Submesh face index -> parent face index (injective).
    pub face_back_map: Vec<u32>,
}

/// Extracts the faces carrying `label` into a standalone mesh. Unreferenced
/// vertices are dropped and normals recomputed on the submesh.
pub fn extract_submesh(mesh: &Mesh, labeling: &Labeling, label: u32) -> Result<SubmeshMap> {
    if labeling.labels.len() != mesh.face_count() {
        return Err(Error::InvalidMesh(format!(
            "labeling has {} entries for {} faces",
            labeling.labels.len(),
            mesh.face_count()
        )));
    }
    let face_back_map = labeling.faces_with(label);
    if face_back_map.is_empty() {
        return Err(Error::EmptyLabel(label));
    }
    let mut vertex_back_map = Vec::new();
    let mut fwd = vec![u32::MAX; mesh.vertex_count()];
    let mut faces = Vec::with_capacity(face_back_map.len());
    for &pf in &face_back_map {
        let f = mesh.faces[pf as usize];
        let mut nf = [0u32; 3];
        for k in 0..3 {
            let pv = f[k];
            if fwd[pv as usize] == u32::MAX {
                fwd[pv as usize] = vertex_back_map.len() as u32;
                vertex_back_map.push(pv);
            }
            nf[k] = fwd[pv as usize];
        }
        faces.push(nf);
    }
    let vertices = vertex_back_map
        .iter()
        .map(|&pv| mesh.vertices[pv as usize])
        .collect();
    Ok(SubmeshMap {
        submesh: Mesh::new(vertices, faces)?,
        vertex_back_map,
        face_back_map,
    })
}

/// Per-face connected component ids: two faces share an id iff linked by a
/// path of edge-adjacent faces with equal labels. Ids are assigned in
/// ascending face discovery order. Returns `(component ids, count)`.
pub fn connected_components(mesh: &Mesh, labeling: &Labeling) -> (Vec<u32>, u32) {
    let adjacency = face_adjacency(mesh);
    connected_components_with(&adjacency, &labeling.labels, mesh.face_count())
}

pub(crate) fn connected_components_with(
    adjacency: &Adjacency,
    labels: &[u32],
    n_faces: usize,
) -> (Vec<u32>, u32) {
    let neighbors = adjacency.face_neighbors(n_faces);
    let mut comp = vec![u32::MAX; n_faces];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for seed in 0..n_faces {
        if comp[seed] != u32::MAX {
            continue;
        }
        comp[seed] = next;
        stack.push(seed as u32);
        while let Some(f) = stack.pop() {
            for &g in &neighbors[f as usize] {
                if comp[g as usize] == u32::MAX && labels[g as usize] == labels[f as usize] {
                    comp[g as usize] = next;
                    stack.push(g);
                }
            }
        }
        next += 1;
    }
    (comp, next)
}
