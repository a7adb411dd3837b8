//! Visual artifacts: colored PLY previews, SVG atlas plots and checkerboard
//! texture bundles (PNG + MTL + OBJ).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::label::Labeling;
use crate::mesh::Mesh;
use crate::spatial::{FieldDomain, ScalarField};
use crate::{Error, Result};

/// Approximate viridis ramp (anchor points, linearly interpolated): dark
/// purple for low values through teal to yellow for high values.
const VIRIDIS: [[f64; 3]; 9] = [
    [0.267, 0.005, 0.329],
    [0.283, 0.141, 0.458],
    [0.254, 0.265, 0.530],
    [0.207, 0.372, 0.553],
    [0.164, 0.471, 0.558],
    [0.128, 0.567, 0.551],
    [0.135, 0.659, 0.518],
    [0.267, 0.749, 0.441],
    [0.993, 0.906, 0.144],
];

pub fn viridis(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let v = VIRIDIS[i][c] * (1.0 - f) + VIRIDIS[i + 1][c] * f;
        out[c] = (v * 255.0).round() as u8;
    }
    out
}

/// Distinct hue per label index.
pub fn label_color(label: u32) -> [u8; 3] {
    // Golden-ratio hue stepping keeps neighboring ids far apart.
    let h = (label as f64 * 0.618_033_988_749_895).fract();
    hsv_to_rgb(h, 0.65, 0.95)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    let (r, g, b) = match (i as i64).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}

/// ASCII PLY with per-vertex colors from a scalar field (viridis over the
/// observed range) or per-face colors from a labeling.
pub fn save_ply_field(mesh: &Mesh, field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if field.domain != FieldDomain::Vertex || field.values.len() != mesh.vertex_count() {
        return Err(Error::InvalidArgument(
            "field must be per-vertex for vertex-colored ply".into(),
        ));
    }
    let lo = field.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field
        .values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if hi - lo > 1e-15 { hi - lo } else { 1.0 };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let e = |err| Error::io(path, err);
    writeln!(w, "ply\nformat ascii 1.0").map_err(e)?;
    writeln!(w, "element vertex {}", mesh.vertex_count()).map_err(e)?;
    writeln!(
        w,
        "property float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue"
    )
    .map_err(e)?;
    writeln!(w, "element face {}", mesh.face_count()).map_err(e)?;
    writeln!(w, "property list uchar int vertex_indices\nend_header").map_err(e)?;
    for (v, &val) in mesh.vertices.iter().zip(&field.values) {
        let c = viridis((val - lo) / span);
        writeln!(
            w,
            "{:.6} {:.6} {:.6} {} {} {}",
            v.x, v.y, v.z, c[0], c[1], c[2]
        )
        .map_err(e)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2]).map_err(e)?;
    }
    Ok(())
}

/// ASCII PLY with per-face label colors.
pub fn save_ply_labels(mesh: &Mesh, labeling: &Labeling, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if labeling.labels.len() != mesh.face_count() {
        return Err(Error::InvalidArgument("labeling does not match mesh".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let e = |err| Error::io(path, err);
    writeln!(w, "ply\nformat ascii 1.0").map_err(e)?;
    writeln!(w, "element vertex {}", mesh.vertex_count()).map_err(e)?;
    writeln!(w, "property float x\nproperty float y\nproperty float z").map_err(e)?;
    writeln!(w, "element face {}", mesh.face_count()).map_err(e)?;
    writeln!(
        w,
        "property list uchar int vertex_indices\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header"
    )
    .map_err(e)?;
    for v in &mesh.vertices {
        writeln!(w, "{:.6} {:.6} {:.6}", v.x, v.y, v.z).map_err(e)?;
    }
    for (f, &l) in mesh.faces.iter().zip(&labeling.labels) {
        let c = label_color(l);
        writeln!(w, "3 {} {} {} {} {} {}", f[0], f[1], f[2], c[0], c[1], c[2]).map_err(e)?;
    }
    Ok(())
}

pub const SVG_VIEWBOX: f64 = 1024.0;

/// SVG atlas plot: one polygon per UV triangle in a 1024x1024 viewbox, colored
/// by label when given.
pub fn save_atlas_svg(
    mesh: &Mesh,
    uv: &[[f64; 2]],
    labels: Option<&Labeling>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if uv.len() != mesh.vertex_count() {
        return Err(Error::InvalidArgument("uv does not match mesh".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let e = |err| Error::io(path, err);
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {0} {0}">"#,
        SVG_VIEWBOX
    )
    .map_err(e)?;
    writeln!(
        w,
        r##"<rect width="{0}" height="{0}" fill="#181818"/>"##,
        SVG_VIEWBOX
    )
    .map_err(e)?;
    let to_px = |p: [f64; 2]| {
        // v axis points up in UV space, down in SVG.
        (p[0] * SVG_VIEWBOX, (1.0 - p[1]) * SVG_VIEWBOX)
    };
    for (fi, f) in mesh.faces.iter().enumerate() {
        let color = match labels {
            Some(l) => label_color(l.labels[fi]),
            None => [90u8, 140, 200],
        };
        let pts: Vec<String> = f
            .iter()
            .map(|&v| {
                let (x, y) = to_px(uv[v as usize]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(
            w,
            r##"<polygon points="{}" fill="#{:02x}{:02x}{:02x}" fill-opacity="0.75" stroke="#ffffff" stroke-width="0.4"/>"##,
            pts.join(" "),
            color[0],
            color[1],
            color[2]
        )
        .map_err(e)?;
    }
    writeln!(w, "</svg>").map_err(e)?;
    Ok(())
}

pub const CHECKER_SIZE: u32 = 512;
pub const CHECKER_CELLS: u32 = 8;

/// Writes the checkerboard texture bundle next to `obj_path`: a 512x512 PNG
/// with an 8x8 pattern (exactly two colors), an MTL referencing it, and the
/// UV-mapped OBJ pointing at the MTL.
pub fn save_checker_bundle(
    mesh: &Mesh,
    uv: &[[f64; 2]],
    obj_path: impl AsRef<Path>,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let obj_path = obj_path.as_ref();
    let png_path = obj_path.with_extension("png");
    let mtl_path = obj_path.with_extension("mtl");

    let dark = [40u8, 40, 40];
    let light = [220u8, 220, 220];
    let cell = CHECKER_SIZE / CHECKER_CELLS;
    let mut img = image::RgbImage::new(CHECKER_SIZE, CHECKER_SIZE);
    for (x, y, p) in img.enumerate_pixels_mut() {
        let parity = (x / cell + y / cell) % 2;
        p.0 = if parity == 0 { dark } else { light };
    }
    img.save(&png_path)
        .map_err(|err| Error::InvalidArgument(format!("png encode failed: {err}")))?;

    let mtl_name = mtl_path
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("checker.mtl")
        .to_string();
    let png_name = png_path
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("checker.png")
        .to_string();
    std::fs::write(
        &mtl_path,
        format!("newmtl checker\nKd 1.0 1.0 1.0\nmap_Kd {png_name}\n"),
    )
    .map_err(|e| Error::io(&mtl_path, e))?;
    crate::obj::save_obj_with_mtl(mesh, Some(uv), obj_path, Some((&mtl_name, "checker")))?;
    Ok((png_path, mtl_path))
}
