//! Sidecar caching of expensive per-mesh fields (AO, ShDF), keyed by a hash
//! of the mesh geometry and the sampling configuration.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::mesh::Mesh;
use crate::spatial::{FieldConfig, ScalarField};
use crate::Result;

/// Hex digest of the mesh geometry (positions and faces, exact bits).
pub fn mesh_hash(mesh: &Mesh) -> String {
    let mut h = Sha256::new();
    for v in &mesh.vertices {
        h.update(v.x.to_le_bytes());
        h.update(v.y.to_le_bytes());
        h.update(v.z.to_le_bytes());
    }
    for f in &mesh.faces {
        for &i in f {
            h.update(i.to_le_bytes());
        }
    }
    hex16(&h.finalize())
}

fn config_hash(kind: &str, config: &FieldConfig) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(config.ao_samples.to_le_bytes());
    h.update(config.shdf_rays.to_le_bytes());
    h.update(config.cone_full_angle.to_le_bytes());
    h.update(config.offset_eps.to_le_bytes());
    h.update(config.rng_seed.to_le_bytes());
    hex16(&h.finalize())
}

fn hex16(bytes: &[u8]) -> String {
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache path beside the input:
/// `<input_stem>.<kind>.<mesh_hash>.<config_hash>.json`.
pub fn sidecar_path(input: &Path, kind: &str, mesh: &Mesh, config: &FieldConfig) -> PathBuf {
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh");
    let name = format!(
        "{stem}.{kind}.{}.{}.json",
        mesh_hash(mesh),
        config_hash(kind, config)
    );
    input.with_file_name(name)
}

/// Loads a cached field if one matches; otherwise computes it with `f` and
/// writes the sidecar.
pub fn cached_field(
    input: &Path,
    kind: &str,
    mesh: &Mesh,
    config: &FieldConfig,
    f: impl FnOnce() -> ScalarField,
) -> Result<(ScalarField, bool)> {
    let path = sidecar_path(input, kind, mesh, config);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(field) = serde_json::from_str::<ScalarField>(&text) {
            return Ok((field, true));
        }
    }
    let field = f();
    let text = serde_json::to_string(&field)?;
    std::fs::write(&path, text).map_err(|e| crate::Error::io(&path, e))?;
    Ok((field, false))
}
