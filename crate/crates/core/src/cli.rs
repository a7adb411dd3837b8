//! Implementations behind the `uvforge` subcommands. Each command loads its
//! inputs, runs the pipeline, writes artifacts plus a manifest, and returns
//! the manifest so callers (and `rerun`) can reproduce outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::label::Labeling;
use crate::loss::SeamConfig;
use crate::manifest::{timed_stage, RunConfig, RunManifest};
use crate::mesh::{face_adjacency, normalize_mesh, Mesh};
use crate::metrics::{self, MetricReport};
use crate::seg::{segment_mesh, SegmentConfig};
use crate::spatial::{ambient_occlusion, Bvh, FieldConfig, ScalarField};
use crate::train::{
    train_base, train_semantic, train_visibility, Pipeline, TrainConfig, UVResult,
};
use crate::{cache, export, obj, Error, Result};

/// Applies the thread settings: explicit flag, then UVFORGE_THREADS, then the
/// platform default. Returns the effective count when pinned.
pub fn setup_threads(flag: Option<usize>) -> Option<usize> {
    let n = flag.or_else(|| {
        std::env::var("UVFORGE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })?;
    std::env::set_var("MATMUL_NUM_THREADS", n.to_string());
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Some(n)
}

fn stem_of(input: &Path) -> String {
    input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_string()
}

fn field_config(cfg: &RunConfig) -> FieldConfig {
    FieldConfig {
        ao_samples: cfg.ao_samples.unwrap_or(256),
        shdf_rays: cfg.shdf_rays.unwrap_or(60),
        rng_seed: cfg.seed.unwrap_or(0),
        ..FieldConfig::default()
    }
}

fn train_config(cfg: &RunConfig, checkpoint: Option<PathBuf>) -> TrainConfig {
    let mut tc = TrainConfig {
        iterations: cfg.iterations.unwrap_or(3000),
        lr: cfg.lr.unwrap_or(1e-3),
        seed: cfg.seed.unwrap_or(0),
        checkpoint,
        ..TrainConfig::default()
    };
    tc.weights.lambda_vis = cfg.lambda_vis.unwrap_or(tc.weights.lambda_vis);
    tc.seam.tau_scale = cfg.tau_scale.unwrap_or(tc.seam.tau_scale);
    tc
}

/// Serialized per-face labels (the `labels.json` schema: `labels[i]` is the
/// label of face `i`).
#[derive(Debug, Serialize, Deserialize)]
pub struct LabelsFile {
    pub num_faces: usize,
    pub num_labels: u32,
    pub labels: Vec<u32>,
}

impl LabelsFile {
    pub fn from_labeling(labeling: &Labeling) -> LabelsFile {
        LabelsFile {
            num_faces: labeling.labels.len(),
            num_labels: labeling.num_labels,
            labels: labeling.labels.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Labeling> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: LabelsFile = serde_json::from_str(&text)?;
        Ok(Labeling {
            labels: file.labels,
            num_labels: file.num_labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SeamsFile {
    tau_scale: f64,
    uv_side: f64,
    tau: f64,
    soft: Vec<f64>,
    hard: Vec<bool>,
}

/// `segment`: ShDF partitioning; writes labels.json, a colored PLY preview
/// and the manifest.
pub fn cmd_segment(input: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<RunManifest> {
    let cfg = cfg.resolve();
    let mut manifest = RunManifest::new("segment", input, cfg.clone());
    let stem = stem_of(input);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let loaded = timed_stage(&mut manifest, "load", || obj::load_obj(input))?;
    let mesh = loaded.mesh;
    let fields = field_config(&cfg);
    let seg_cfg = SegmentConfig {
        fields,
        seed: cfg.seed.unwrap_or(0),
        ..SegmentConfig::default()
    };
    let k = cfg.k.unwrap_or(4);
    // Raw thickness field cached beside the input.
    let shdf = timed_stage(&mut manifest, "shdf", || {
        let resolved = crate::spatial::FieldConfig {
            rng_seed: seg_cfg.seed,
            ..seg_cfg.fields
        };
        let (field, _) = cache::cached_field(input, "shdf", &mesh, &resolved, || {
            let bvh = Bvh::build(&mesh);
            crate::spatial::shape_diameter(&mesh, &bvh, &resolved)
        })?;
        Ok(field)
    })?;
    let result = timed_stage(&mut manifest, "segment", || {
        crate::seg::segment_mesh_with_shdf(&mesh, k, &seg_cfg, &shdf)
    })?;

    let labels_path = out_dir.join(format!("{stem}.labels.json"));
    LabelsFile::from_labeling(&result.labeling).save(&labels_path)?;
    manifest.add_output(&labels_path);

    let ply_path = out_dir.join(format!("{stem}.labels.ply"));
    export::save_ply_labels(&mesh, &result.labeling, &ply_path)?;
    manifest.add_output(&ply_path);

    let manifest_path = out_dir.join(format!("{stem}.segment.manifest.json"));
    manifest.save(&manifest_path)?;
    Ok(manifest)
}

fn compute_ao_cached(
    input: &Path,
    mesh: &Mesh,
    fields: &FieldConfig,
) -> Result<ScalarField> {
    let (field, _cached) = cache::cached_field(input, "ao", mesh, fields, || {
        let bvh = Bvh::build(mesh);
        ambient_occlusion(mesh, &bvh, fields)
    })?;
    Ok(field)
}

/// `param`: trains the requested pipeline and writes the UV-mapped OBJ, seam
/// scores, loss trace and manifest.
pub fn cmd_param(
    input: &Path,
    out_dir: &Path,
    cfg: &RunConfig,
    labels_file: Option<&Path>,
) -> Result<RunManifest> {
    let cfg = cfg.resolve();
    let pipeline: Pipeline = cfg
        .pipeline
        .as_deref()
        .unwrap_or("base")
        .parse()?;
    let mut manifest = RunManifest::new("param", input, cfg.clone());
    if let Some(l) = labels_file {
        manifest
            .extra
            .insert("labels".into(), l.to_string_lossy().into_owned());
    }
    let stem = stem_of(input);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let loaded = timed_stage(&mut manifest, "load", || obj::load_obj(input))?;
    let mesh = timed_stage(&mut manifest, "normalize", || {
        normalize_mesh(&loaded.mesh)
    })?;

    let ckpt = out_dir.join(format!("{stem}.{}.ckpt", pipeline.name()));
    let tc = train_config(&cfg, Some(ckpt));
    let fields = field_config(&cfg);
    let pad = cfg.pad.unwrap_or(0.05);

    // Ambient occlusion on the normalized mesh, cached beside the input.
    let need_ao = matches!(
        pipeline,
        Pipeline::Visibility | Pipeline::SemanticVisibility
    );
    let ao = if need_ao {
        Some(timed_stage(&mut manifest, "ambient-occlusion", || {
            compute_ao_cached(input, &mesh, &fields)
        })?)
    } else {
        None
    };

    // Labeling for semantic pipelines: a labels file or a fresh segmentation.
    let need_labels = matches!(
        pipeline,
        Pipeline::Semantic | Pipeline::SemanticVisibility
    );
    let labeling = if need_labels {
        Some(match labels_file {
            Some(path) => LabelsFile::load(path)?,
            None => {
                let seg_cfg = SegmentConfig {
                    fields,
                    seed: cfg.seed.unwrap_or(0),
                    ..SegmentConfig::default()
                };
                let k = cfg.k.unwrap_or(4);
                timed_stage(&mut manifest, "segment", || {
                    segment_mesh(&mesh, k, &seg_cfg)
                })?
                .labeling
            }
        })
    } else {
        None
    };

    // Train.
    let (uv, seam_soft, trace, used_labeling): (
        Vec<[f64; 2]>,
        Vec<f64>,
        Vec<crate::train::LossBreakdown>,
        Option<Labeling>,
    ) = match pipeline {
        Pipeline::Base => {
            let r: UVResult = timed_stage(&mut manifest, "train", || train_base(&mesh, &tc))?;
            (
                crate::train::normalize_island(&r.uv),
                r.seam_soft,
                r.loss_trace,
                None,
            )
        }
        Pipeline::Visibility => {
            let ao = ao.as_ref().unwrap();
            let r = timed_stage(&mut manifest, "train", || train_visibility(&mesh, ao, &tc))?;
            (
                crate::train::normalize_island(&r.uv),
                r.seam_soft,
                r.loss_trace,
                None,
            )
        }
        Pipeline::Semantic | Pipeline::SemanticVisibility => {
            let labeling = labeling.as_ref().unwrap();
            let r = timed_stage(&mut manifest, "train", || {
                train_semantic(&mesh, labeling, &tc, ao.as_ref(), pad)
            })?;
            let mut trace = Vec::new();
            for p in &r.parts {
                trace.extend(p.result.loss_trace.iter().cloned());
            }
            (r.final_uv, r.seam_soft, trace, Some(r.labeling))
        }
    };

    // Outputs.
    let obj_path = out_dir.join(format!("{stem}.{}.obj", pipeline.name()));
    obj::save_obj(&mesh, Some(&uv), &obj_path)?;
    manifest.add_output(&obj_path);

    let adjacency = face_adjacency(&mesh);
    let hard = metrics::seam_vertices_hard(&adjacency, &uv, tc.seam.tau_scale);
    let rings = crate::loss::RingIndex::from_adjacency(&adjacency);
    let scores = crate::loss::seam_scores_values(&uv, &rings, &tc.seam);
    let seams_path = out_dir.join(format!("{stem}.{}.seams.json", pipeline.name()));
    std::fs::write(
        &seams_path,
        serde_json::to_string(&SeamsFile {
            tau_scale: tc.seam.tau_scale,
            uv_side: scores.uv_side,
            tau: scores.tau,
            soft: seam_soft,
            hard,
        })?,
    )
    .map_err(|e| Error::io(&seams_path, e))?;
    manifest.add_output(&seams_path);

    let losses_path = out_dir.join(format!("{stem}.{}.losses.jsonl", pipeline.name()));
    {
        let file =
            std::fs::File::create(&losses_path).map_err(|e| Error::io(&losses_path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for (i, b) in trace.iter().enumerate() {
            if i % tc.log_every == 0 || i + 1 == trace.len() {
                writeln!(w, "{}", serde_json::to_string(b)?)
                    .map_err(|e| Error::io(&losses_path, e))?;
            }
        }
    }
    manifest.add_output(&losses_path);

    if let Some(lab) = used_labeling {
        let labels_path = out_dir.join(format!("{stem}.{}.labels.json", pipeline.name()));
        LabelsFile::from_labeling(&lab).save(&labels_path)?;
        manifest.add_output(&labels_path);
    }

    let manifest_path = out_dir.join(format!("{stem}.{}.manifest.json", pipeline.name()));
    manifest.save(&manifest_path)?;
    Ok(manifest)
}

/// `eval`: metric report for a UV-mapped OBJ.
pub fn cmd_eval(
    input: &Path,
    out_dir: &Path,
    cfg: &RunConfig,
    with_ao: bool,
    labels: Option<&Path>,
    ref_labels: Option<&Path>,
) -> Result<MetricReport> {
    let (report, _manifest) = cmd_eval_inner(input, out_dir, cfg, with_ao, labels, ref_labels)?;
    Ok(report)
}

pub fn cmd_eval_inner(
    input: &Path,
    out_dir: &Path,
    cfg: &RunConfig,
    with_ao: bool,
    labels: Option<&Path>,
    ref_labels: Option<&Path>,
) -> Result<(MetricReport, RunManifest)> {
    let cfg = cfg.resolve();
    let mut manifest = RunManifest::new("eval", input, cfg.clone());
    if with_ao {
        manifest.extra.insert("ao".into(), "true".into());
    }
    if let Some(p) = labels {
        manifest
            .extra
            .insert("labels".into(), p.to_string_lossy().into_owned());
    }
    if let Some(p) = ref_labels {
        manifest
            .extra
            .insert("ref_labels".into(), p.to_string_lossy().into_owned());
    }
    let stem = stem_of(input);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let loaded = timed_stage(&mut manifest, "load", || obj::load_obj(input))?;
    let uv = loaded
        .uv
        .ok_or_else(|| Error::Evaluation("input has no vt records".into()))?;
    let mesh = loaded.mesh;
    let adjacency = face_adjacency(&mesh);

    let fields = field_config(&cfg);
    let ao = if with_ao {
        Some(timed_stage(&mut manifest, "ambient-occlusion", || {
            compute_ao_cached(input, &mesh, &fields)
        })?)
    } else {
        None
    };

    let cand;
    let reference;
    let label_pair = match (labels, ref_labels) {
        (Some(a), Some(b)) => {
            cand = LabelsFile::load(a)?;
            reference = LabelsFile::load(b)?;
            if cand.labels.len() != reference.labels.len() {
                return Err(Error::Evaluation(
                    "labels and ref-labels have different lengths".into(),
                ));
            }
            Some((cand.labels.as_slice(), reference.labels.as_slice()))
        }
        (None, None) => None,
        _ => {
            return Err(Error::Evaluation(
                "hamming/rand need both --labels and --ref-labels".into(),
            ))
        }
    };

    let report = metrics::evaluate(
        &mesh,
        &adjacency,
        &uv,
        ao.as_ref().map(|f| f.values.as_slice()),
        cfg.tau_scale.unwrap_or(0.1),
        label_pair,
    )?;

    if let Some(field) = &ao {
        let ply_path = out_dir.join(format!("{stem}.ao.ply"));
        crate::export::save_ply_field(&mesh, field, &ply_path)?;
        manifest.add_output(&ply_path);
    }

    let report_path = out_dir.join(format!("{stem}.report.json"));
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .map_err(|e| Error::io(&report_path, e))?;
    manifest.add_output(&report_path);

    if let Some(hist) = &report.histogram {
        let csv_path = out_dir.join(format!("{stem}.histogram.csv"));
        let mut text = String::from("bin_lo,bin_hi,seam_density,all_density\n");
        for b in 0..hist.bins {
            let lo = b as f64 / hist.bins as f64;
            let hi = (b + 1) as f64 / hist.bins as f64;
            text.push_str(&format!(
                "{lo:.3},{hi:.3},{:.6},{:.6}\n",
                hist.seam[b], hist.all[b]
            ));
        }
        std::fs::write(&csv_path, text).map_err(|e| Error::io(&csv_path, e))?;
        manifest.add_output(&csv_path);
    }

    let manifest_path = out_dir.join(format!("{stem}.eval.manifest.json"));
    manifest.save(&manifest_path)?;
    Ok((report, manifest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    AtlasSvg,
    Checker,
}

impl std::str::FromStr for ExportKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<ExportKind> {
        match s {
            "atlas-svg" => Ok(ExportKind::AtlasSvg),
            "checker" => Ok(ExportKind::Checker),
            other => Err(Error::InvalidArgument(format!(
                "unknown export kind '{other}'"
            ))),
        }
    }
}

/// `export`: SVG atlas plot or checkerboard bundle for a UV-mapped OBJ.
pub fn cmd_export(
    input: &Path,
    out_dir: &Path,
    kind: ExportKind,
    labels: Option<&Path>,
) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("export", input, RunConfig::default());
    manifest.extra.insert(
        "kind".into(),
        match kind {
            ExportKind::AtlasSvg => "atlas-svg".into(),
            ExportKind::Checker => "checker".into(),
        },
    );
    if let Some(p) = labels {
        manifest
            .extra
            .insert("labels".into(), p.to_string_lossy().into_owned());
    }
    let stem = stem_of(input);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let loaded = timed_stage(&mut manifest, "load", || obj::load_obj(input))?;
    let uv = loaded
        .uv
        .ok_or_else(|| Error::Evaluation("input has no vt records".into()))?;
    let mesh = loaded.mesh;

    match kind {
        ExportKind::AtlasSvg => {
            let labeling = match labels {
                Some(p) => Some(LabelsFile::load(p)?),
                None => None,
            };
            let svg_path = out_dir.join(format!("{stem}.atlas.svg"));
            export::save_atlas_svg(&mesh, &uv, labeling.as_ref(), &svg_path)?;
            manifest.add_output(&svg_path);
        }
        ExportKind::Checker => {
            let obj_path = out_dir.join(format!("{stem}.checker.obj"));
            let (png, mtl) = export::save_checker_bundle(&mesh, &uv, &obj_path)?;
            manifest.add_output(&obj_path);
            manifest.add_output(&mtl);
            manifest.add_output(&png);
        }
    }
    let manifest_path = out_dir.join(format!("{stem}.export.manifest.json"));
    manifest.save(&manifest_path)?;
    Ok(manifest)
}

/// `rerun`: re-executes the command recorded in a manifest, writing into
/// `out_dir`. With a fixed thread count, outputs reproduce bitwise.
pub fn cmd_rerun(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest> {
    let m = RunManifest::load(manifest_path)?;
    let extra_path = |key: &str| m.extra.get(key).map(PathBuf::from);
    match m.command.as_str() {
        "segment" => cmd_segment(&m.input, out_dir, &m.config),
        "param" => cmd_param(&m.input, out_dir, &m.config, extra_path("labels").as_deref()),
        "eval" => {
            let (_, manifest) = cmd_eval_inner(
                &m.input,
                out_dir,
                &m.config,
                m.extra.get("ao").is_some(),
                extra_path("labels").as_deref(),
                extra_path("ref_labels").as_deref(),
            )?;
            Ok(manifest)
        }
        "export" => {
            let kind: ExportKind = m
                .extra
                .get("kind")
                .ok_or_else(|| Error::InvalidArgument("manifest missing export kind".into()))?
                .parse()?;
            cmd_export(&m.input, out_dir, kind, extra_path("labels").as_deref())
        }
        other => Err(Error::InvalidArgument(format!(
            "manifest has unknown command '{other}'"
        ))),
    }
}

/// Seam config accessor used by tests to mirror the CLI defaults.
pub fn default_seam_config() -> SeamConfig {
    SeamConfig::default()
}
