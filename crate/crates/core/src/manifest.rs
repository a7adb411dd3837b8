//! Run manifests: every CLI command records its resolved configuration,
//! per-stage wall-clock and emitted files, and can be re-run from the
//! manifest to reproduce outputs bitwise (at a fixed thread count).

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::Result;

/// The externally visible run configuration. All fields optional so partial
/// config files and flag overrides merge cleanly; `resolve` fills defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub pipeline: Option<String>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "T")]
    pub iterations: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub lambda_vis: Option<f64>,
    pub tau_scale: Option<f64>,
    pub pad: Option<f64>,
    pub ao_samples: Option<u32>,
    pub shdf_rays: Option<u32>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Field-wise override: `other`'s set fields win.
    pub fn merged_with(&self, other: &RunConfig) -> RunConfig {
        RunConfig {
            pipeline: other.pipeline.clone().or_else(|| self.pipeline.clone()),
            k: other.k.or(self.k),
            iterations: other.iterations.or(self.iterations),
            lr: other.lr.or(self.lr),
            seed: other.seed.or(self.seed),
            lambda_vis: other.lambda_vis.or(self.lambda_vis),
            tau_scale: other.tau_scale.or(self.tau_scale),
            pad: other.pad.or(self.pad),
            ao_samples: other.ao_samples.or(self.ao_samples),
            shdf_rays: other.shdf_rays.or(self.shdf_rays),
            threads: other.threads.or(self.threads),
        }
    }

    /// Fully resolved copy with defaults applied.
    pub fn resolve(&self) -> RunConfig {
        RunConfig {
            pipeline: Some(self.pipeline.clone().unwrap_or_else(|| "base".into())),
            k: Some(self.k.unwrap_or(4)),
            iterations: Some(self.iterations.unwrap_or(3000)),
            lr: Some(self.lr.unwrap_or(1e-3)),
            seed: Some(self.seed.unwrap_or(0)),
            lambda_vis: Some(self.lambda_vis.unwrap_or(0.004)),
            tau_scale: Some(self.tau_scale.unwrap_or(0.1)),
            pad: Some(self.pad.unwrap_or(0.05)),
            ao_samples: Some(self.ao_samples.unwrap_or(256)),
            shdf_rays: Some(self.shdf_rays.unwrap_or(60)),
            threads: self.threads,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTime {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub input: PathBuf,
    pub config: RunConfig,
    pub seed: u64,
    pub stages: Vec<StageTime>,
    pub outputs: Vec<PathBuf>,
    /// Extra command arguments required for reproduction (e.g. label files).
    #[serde(default)]
    pub extra: std::collections::BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, input: &Path, config: RunConfig) -> RunManifest {
        let seed = config.seed.unwrap_or(0);
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input: input.to_path_buf(),
            config,
            seed,
            stages: Vec::new(),
            outputs: Vec::new(),
        extra: Default::default(),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| crate::Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Times a named stage and records it in the manifest.
pub fn timed_stage<T>(
    manifest: &mut RunManifest,
    name: &str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    manifest.stages.push(StageTime {
        name: name.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    });
    Ok(out)
}
