//! Wavefront OBJ subset: `v x y z`, `vt u v`, `vn x y z`, `f` with
//! `v`, `v/vt`, `v/vt/vn` or `v//vn` corners. `#` comments ignored. Output
//! floats are printed with 6 decimal places.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct ObjOptions {
    /// Fan-triangulate quads and larger polygons (default); when false,
    /// non-triangular faces are rejected.
    pub triangulate_polygons: bool,
}

impl Default for ObjOptions {
    fn default() -> Self {
        ObjOptions {
            triangulate_polygons: true,
        }
    }
}

/// Result of loading an OBJ file.
#[derive(Debug)]
pub struct LoadedObj {
    pub mesh: Mesh,
    /// Per-vertex UVs when every referenced vertex carried a `vt`.
    pub uv: Option<Vec<[f64; 2]>>,
    /// Non-fatal issues (non-manifold edges, ignored records).
    pub warnings: Vec<String>,
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<LoadedObj> {
    load_obj_with(path, ObjOptions::default())
}

pub fn load_obj_with(path: impl AsRef<Path>, opts: ObjOptions) -> Result<LoadedObj> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut positions: Vec<Vec3> = Vec::new();
    let mut texcoords: Vec<[f64; 2]> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut vertex_uv: Vec<Option<[f64; 2]>> = Vec::new();
    let mut warnings = Vec::new();
    let mut saw_vt_corner = false;

    let parse_err = |line: usize, msg: String| Error::ObjParse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    for (ln, line) in reader.lines().enumerate() {
        let ln = ln + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap();
        match tag {
            "v" => {
                let mut c = [0.0f64; 3];
                for v in &mut c {
                    *v = it
                        .next()
                        .ok_or_else(|| parse_err(ln, "v record needs 3 coordinates".into()))?
                        .parse()
                        .map_err(|e| parse_err(ln, format!("bad coordinate: {e}")))?;
                }
                positions.push(Vec3::new(c[0], c[1], c[2]));
                vertex_uv.push(None);
            }
            "vt" => {
                let mut c = [0.0f64; 2];
                for v in &mut c {
                    *v = it
                        .next()
                        .ok_or_else(|| parse_err(ln, "vt record needs 2 coordinates".into()))?
                        .parse()
                        .map_err(|e| parse_err(ln, format!("bad texcoord: {e}")))?;
                }
                texcoords.push(c);
            }
            "vn" => {
                // Normals are recomputed after load; record ignored.
            }
            "f" => {
                let mut corner_v = Vec::new();
                for corner in it {
                    let mut parts = corner.split('/');
                    let vi: i64 = parts
                        .next()
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| parse_err(ln, format!("bad face corner '{corner}'")))?
                        .parse()
                        .map_err(|e| parse_err(ln, format!("bad face index: {e}")))?;
                    let vi = resolve_index(vi, positions.len())
                        .ok_or_else(|| parse_err(ln, format!("face index {vi} out of range")))?;
                    if let Some(ts) = parts.next() {
                        if !ts.is_empty() {
                            let ti: i64 = ts
                                .parse()
                                .map_err(|e| parse_err(ln, format!("bad vt index: {e}")))?;
                            let ti = resolve_index(ti, texcoords.len()).ok_or_else(|| {
                                parse_err(ln, format!("vt index {ti} out of range"))
                            })?;
                            saw_vt_corner = true;
                            vertex_uv[vi as usize] = Some(texcoords[ti as usize]);
                        }
                    }
                    corner_v.push(vi);
                }
                if corner_v.len() < 3 {
                    return Err(parse_err(ln, "face needs at least 3 corners".into()));
                }
                if corner_v.len() > 3 && !opts.triangulate_polygons {
                    return Err(parse_err(
                        ln,
                        format!("{}-gon rejected (triangulation disabled)", corner_v.len()),
                    ));
                }
                for k in 1..corner_v.len() - 1 {
                    let tri = [corner_v[0], corner_v[k], corner_v[k + 1]];
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        return Err(parse_err(
                            ln,
                            format!("degenerate face: repeated index in {:?}", tri),
                        ));
                    }
                    faces.push(tri);
                }
            }
            "mtllib" | "usemtl" | "o" | "g" | "s" => {}
            other => warnings.push(format!("line {ln}: ignored record '{other}'")),
        }
    }

    if positions.is_empty() {
        return Err(parse_err(0, "no vertices in file".into()));
    }
    let mesh = Mesh::new(positions, faces)?;
    let adjacency = crate::mesh::face_adjacency(&mesh);
    if !adjacency.non_manifold_edges.is_empty() {
        warnings.push(format!(
            "{} non-manifold edges excluded from adjacency",
            adjacency.non_manifold_edges.len()
        ));
    }
    let uv = if saw_vt_corner && vertex_uv.iter().all(|u| u.is_some()) {
        Some(vertex_uv.into_iter().map(|u| u.unwrap()).collect())
    } else {
        if saw_vt_corner {
            warnings.push("partial vt coverage; UVs dropped".into());
        }
        None
    };
    Ok(LoadedObj {
        mesh,
        uv,
        warnings,
    })
}

fn resolve_index(i: i64, len: usize) -> Option<u32> {
    let idx = if i > 0 {
        i - 1
    } else if i < 0 {
        len as i64 + i
    } else {
        return None;
    };
    if idx >= 0 && (idx as usize) < len {
        Some(idx as u32)
    } else {
        None
    }
}

/// Writes the mesh (and optional per-vertex UVs) as OBJ. Round-tripping
/// through [`load_obj`] reproduces positions and UVs to 1e-6.
pub fn save_obj(mesh: &Mesh, uv: Option<&[[f64; 2]]>, path: impl AsRef<Path>) -> Result<()> {
    save_obj_with_mtl(mesh, uv, path, None)
}

pub fn save_obj_with_mtl(
    mesh: &Mesh,
    uv: Option<&[[f64; 2]]>,
    path: impl AsRef<Path>,
    mtl: Option<(&str, &str)>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(uv) = uv {
        if uv.len() != mesh.vertex_count() {
            return Err(Error::InvalidArgument(format!(
                "uv count {} != vertex count {}",
                uv.len(),
                mesh.vertex_count()
            )));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    if let Some((mtllib, material)) = mtl {
        writeln!(w, "mtllib {mtllib}").map_err(io_err)?;
        writeln!(w, "usemtl {material}").map_err(io_err)?;
    }
    for v in &mesh.vertices {
        writeln!(w, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z).map_err(io_err)?;
    }
    if let Some(uv) = uv {
        for t in uv {
            writeln!(w, "vt {:.6} {:.6}", t[0], t[1]).map_err(io_err)?;
        }
        for f in &mesh.faces {
            writeln!(
                w,
                "f {}/{} {}/{} {}/{}",
                f[0] + 1,
                f[0] + 1,
                f[1] + 1,
                f[1] + 1,
                f[2] + 1,
                f[2] + 1
            )
            .map_err(io_err)?;
        }
    } else {
        for f in &mesh.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).map_err(io_err)?;
        }
    }
    Ok(())
}
