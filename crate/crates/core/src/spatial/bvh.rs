//! Median-split bounding volume hierarchy over face AABBs.
//!
//! Intersection results are contracted to match brute force exactly: the same
//! hit face and parameter, with ties on `t` broken toward the smaller face
//! index in both paths.

use crate::geom::{Aabb, Vec3};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face: u32,
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    a: Vec3,
    b: Vec3,
    c: Vec3,
    face: u32,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        aabb: Aabb,
        start: u32,
        len: u32,
    },
    Inner {
        aabb: Aabb,
        left: u32,
        right: u32,
    },
}

/// Binary BVH; immutable after build.
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Tri>,
    /// Permutation of face indices in leaf order.
    pub face_order: Vec<u32>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(mesh: &Mesh) -> Bvh {
        assert!(mesh.face_count() > 0, "bvh needs at least one face");
        let mut tris: Vec<Tri> = mesh
            .faces
            .iter()
            .enumerate()
            .map(|(i, f)| Tri {
                a: mesh.vertices[f[0] as usize],
                b: mesh.vertices[f[1] as usize],
                c: mesh.vertices[f[2] as usize],
                face: i as u32,
            })
            .collect();
        let mut nodes = Vec::new();
        build_node(&mut nodes, &mut tris, 0, mesh.face_count());
        let face_order = tris.iter().map(|t| t.face).collect();
        Bvh {
            nodes,
            tris,
            face_order,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Checks the leaf containment invariant (test support).
    pub fn leaves_contain_faces(&self, eps: f64) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Leaf { aabb, start, len } => self.tris
                [*start as usize..(*start + *len) as usize]
                .iter()
                .all(|t| {
                    aabb.contains(t.a, eps) && aabb.contains(t.b, eps) && aabb.contains(t.c, eps)
                }),
            Node::Inner { .. } => true,
        })
    }

    /// Nearest intersection with `t > t_min`, skipping `skip_face` if given.
    pub fn intersect(&self, ray: Ray, t_min: f64, skip_face: Option<u32>) -> Option<Hit> {
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut best: Option<Hit> = None;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        stack[sp] = (self.nodes.len() - 1) as u32;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            let aabb = match node {
                Node::Leaf { aabb, .. } | Node::Inner { aabb, .. } => aabb,
            };
            let t_max = best.map_or(f64::INFINITY, |h| h.t);
            // Strict > keeps boxes whose entry ties the current best reachable
            // so index tie-breaks match brute force.
            match aabb.ray_entry(ray.origin, inv, t_min, f64::INFINITY) {
                Some(entry) if entry <= t_max => {}
                _ => continue,
            }
            match node {
                Node::Leaf { start, len, .. } => {
                    for t in &self.tris[*start as usize..(*start + *len) as usize] {
                        if Some(t.face) == skip_face {
                            continue;
                        }
                        if let Some(hit_t) = ray_triangle(ray, t, t_min) {
                            let cand = Hit {
                                t: hit_t,
                                face: t.face,
                            };
                            if better(cand, best) {
                                best = Some(cand);
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack[sp] = *left;
                    sp += 1;
                    stack[sp] = *right;
                    sp += 1;
                }
            }
        }
        best
    }

    /// True when any face blocks the ray beyond `t_min`.
    pub fn hits_any(&self, ray: Ray, t_min: f64) -> bool {
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        stack[sp] = (self.nodes.len() - 1) as u32;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            let aabb = match node {
                Node::Leaf { aabb, .. } | Node::Inner { aabb, .. } => aabb,
            };
            if aabb.ray_entry(ray.origin, inv, t_min, f64::INFINITY).is_none() {
                continue;
            }
            match node {
                Node::Leaf { start, len, .. } => {
                    for t in &self.tris[*start as usize..(*start + *len) as usize] {
                        if ray_triangle(ray, t, t_min).is_some() {
                            return true;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack[sp] = *left;
                    sp += 1;
                    stack[sp] = *right;
                    sp += 1;
                }
            }
        }
        false
    }
}

fn better(cand: Hit, best: Option<Hit>) -> bool {
    match best {
        None => true,
        Some(b) => cand.t < b.t || (cand.t == b.t && cand.face < b.face),
    }
}

/// Brute-force nearest intersection over all mesh faces; the oracle the BVH is
/// contracted against.
pub fn brute_force_intersect(
    mesh: &Mesh,
    ray: Ray,
    t_min: f64,
    skip_face: Option<u32>,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, f) in mesh.faces.iter().enumerate() {
        if Some(i as u32) == skip_face {
            continue;
        }
        let tri = Tri {
            a: mesh.vertices[f[0] as usize],
            b: mesh.vertices[f[1] as usize],
            c: mesh.vertices[f[2] as usize],
            face: i as u32,
        };
        if let Some(t) = ray_triangle(ray, &tri, t_min) {
            let cand = Hit { t, face: i as u32 };
            if better(cand, best) {
                best = Some(cand);
            }
        }
    }
    best
}

/// Moller-Trumbore, two-sided. Degenerate (zero-area) triangles produce a
/// singular system and are never reported as hits.
fn ray_triangle(ray: Ray, tri: &Tri, t_min: f64) -> Option<f64> {
    let e1 = tri.b - tri.a;
    let e2 = tri.c - tri.a;
    let p = ray.dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - tri.a;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.dir.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv_det;
    if t > t_min {
        Some(t)
    } else {
        None
    }
}

fn build_node(nodes: &mut Vec<Node>, tris: &mut [Tri], offset: usize, _total: usize) -> u32 {
    let mut aabb = Aabb::empty();
    let mut centroid_bb = Aabb::empty();
    for t in tris.iter() {
        aabb.grow(t.a);
        aabb.grow(t.b);
        aabb.grow(t.c);
        centroid_bb.grow((t.a + t.b + t.c) / 3.0);
    }
    if tris.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            aabb,
            start: offset as u32,
            len: tris.len() as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    let axis = centroid_bb.largest_axis();
    let mid = tris.len() / 2;
    tris.select_nth_unstable_by(mid, |x, y| {
        let cx = (x.a + x.b + x.c).axis(axis);
        let cy = (y.a + y.b + y.c).axis(axis);
        cx.partial_cmp(&cy)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.face.cmp(&y.face))
    });
    let (lo, hi) = tris.split_at_mut(mid);
    let left = build_node(nodes, lo, offset, _total);
    let right = build_node(nodes, hi, offset + mid, _total);
    nodes.push(Node::Inner { aabb, left, right });
    (nodes.len() - 1) as u32
}
