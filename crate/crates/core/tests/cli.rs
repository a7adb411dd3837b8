//! End-to-end checks of the uvforge binary: artifact schemas, exit codes and
//! flag handling.

use std::path::Path;
use std::process::Command;

use uvforge::synth;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_uvforge")
}

fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let input = dir.join("dumbbell.obj");
    let mesh = synth::dumbbell(10, 16);
    uvforge::obj::save_obj(&mesh, None, &input).unwrap();
    input
}

#[test]
fn segment_writes_labels_and_preview() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let out = Command::new(bin())
        .args([
            "segment",
            input.to_str().unwrap(),
            "--k",
            "2",
            "--seed",
            "1",
            "--shdf-rays",
            "20",
            "--threads",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let labels_text = std::fs::read_to_string(dir.path().join("dumbbell.labels.json")).unwrap();
    let labels: serde_json::Value = serde_json::from_str(&labels_text).unwrap();
    assert!(labels["num_labels"].as_u64().unwrap() >= 1);
    assert_eq!(
        labels["labels"].as_array().unwrap().len(),
        labels["num_faces"].as_u64().unwrap() as usize
    );
    let ply = std::fs::read_to_string(dir.path().join("dumbbell.labels.ply")).unwrap();
    assert!(ply.starts_with("ply"));
    assert!(dir.path().join("dumbbell.segment.manifest.json").exists());
}

#[test]
fn param_base_produces_uv_obj_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let out = Command::new(bin())
        .args([
            "param",
            input.to_str().unwrap(),
            "--pipeline",
            "base",
            "--iters",
            "3",
            "--seed",
            "1",
            "--threads",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let obj_text = std::fs::read_to_string(dir.path().join("dumbbell.base.obj")).unwrap();
    let vt_count = obj_text.lines().filter(|l| l.starts_with("vt ")).count();
    let v_count = obj_text.lines().filter(|l| l.starts_with("v ")).count();
    assert_eq!(vt_count, v_count);
    // Nondegenerate UV span after normalization.
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for line in obj_text.lines().filter(|l| l.starts_with("vt ")) {
        let mut it = line.split_whitespace().skip(1);
        let u: f64 = it.next().unwrap().parse().unwrap();
        let v: f64 = it.next().unwrap().parse().unwrap();
        lo = [lo[0].min(u), lo[1].min(v)];
        hi = [hi[0].max(u), hi[1].max(v)];
    }
    assert!((hi[0] - lo[0]) * (hi[1] - lo[1]) > 0.1);

    let losses = std::fs::read_to_string(dir.path().join("dumbbell.base.losses.jsonl")).unwrap();
    for line in losses.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["step", "wrap", "repel", "cycle_p", "cycle_n", "ddl", "tdl", "ao", "total"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
    let seams: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dumbbell.base.seams.json")).unwrap())
            .unwrap();
    assert!(seams["soft"].as_array().unwrap().len() > 0);
}

#[test]
fn eval_reports_all_fields_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, uv) = synth::cylinder(1.0, 2.0, 24, 5, true);
    let input = dir.path().join("cylinder.obj");
    uvforge::obj::save_obj(&mesh, Some(&uv), &input).unwrap();
    let out = Command::new(bin())
        .args([
            "eval",
            input.to_str().unwrap(),
            "--ao",
            "--ao-samples",
            "16",
            "--threads",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cylinder.report.json")).unwrap())
            .unwrap();
    for key in [
        "conformality",
        "equiareality",
        "mean_seam_ao",
        "seam_vertex_count",
        "histogram",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    // The analytic cylinder chart is nearly isometric.
    assert!(report["conformality"].as_f64().unwrap() >= 0.99);
    let csv = std::fs::read_to_string(dir.path().join("cylinder.histogram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21); // header + 20 bins
}

#[test]
fn eval_with_matching_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, uv) = synth::flat_grid(4, 1.0);
    let input = dir.path().join("grid.obj");
    uvforge::obj::save_obj(&mesh, Some(&uv), &input).unwrap();
    let labels = dir.path().join("labels.json");
    let labeling = uvforge::Labeling::new((0..mesh.face_count() as u32).map(|i| i % 3).collect());
    std::fs::write(
        &labels,
        serde_json::json!({
            "num_faces": mesh.face_count(),
            "num_labels": 3,
            "labels": labeling.labels,
        })
        .to_string(),
    )
    .unwrap();
    let out = Command::new(bin())
        .args([
            "eval",
            input.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--ref-labels",
            labels.to_str().unwrap(),
            "--threads",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("grid.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["hamming"].as_f64().unwrap(), 0.0);
    assert_eq!(report["rand_index"].as_f64().unwrap(), 1.0);
}

#[test]
fn export_checker_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, uv) = synth::flat_grid(4, 1.0);
    let input = dir.path().join("grid.obj");
    uvforge::obj::save_obj(&mesh, Some(&uv), &input).unwrap();
    for kind in ["atlas-svg", "checker"] {
        let out = Command::new(bin())
            .args(["export", input.to_str().unwrap(), "--kind", kind])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let svg = std::fs::read_to_string(dir.path().join("grid.atlas.svg")).unwrap();
    assert_eq!(svg.matches("<polygon").count(), mesh.face_count());
    assert!(dir.path().join("grid.checker.png").exists());
    assert!(dir.path().join("grid.checker.mtl").exists());
    assert!(dir.path().join("grid.checker.obj").exists());
}

#[test]
fn exit_codes_contract() {
    let dir = tempfile::tempdir().unwrap();
    // 2: missing input names the path.
    let missing = dir.path().join("missing.obj");
    let out = Command::new(bin())
        .args(["segment", missing.to_str().unwrap(), "--k", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.obj"));

    // 2: parse error with line number.
    let broken = dir.path().join("broken.obj");
    std::fs::write(&broken, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 2\n").unwrap();
    let out = Command::new(bin())
        .args(["segment", broken.to_str().unwrap(), "--k", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":4"));

    // 5: eval without vt records.
    let no_uv = write_fixture(dir.path());
    let out = Command::new(bin())
        .args(["eval", no_uv.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));

    // 2: unknown flags come back as clap usage errors.
    let out = Command::new(bin())
        .args(["segment", "--definitely-not-a-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "pipeline": "base",
            "T": 2,
            "seed": 9,
            "ao_samples": 8,
            "shdf_rays": 16
        })
        .to_string(),
    )
    .unwrap();
    let out = Command::new(bin())
        .args([
            "param",
            input.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--iters",
            "3", // overrides T = 2
            "--threads",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("dumbbell.base.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["T"].as_u64(), Some(3));
    assert_eq!(manifest["config"]["seed"].as_u64(), Some(9));
    // Loss trace has header step 0 and the final step.
    let losses = std::fs::read_to_string(dir.path().join("dumbbell.base.losses.jsonl")).unwrap();
    assert_eq!(losses.lines().count(), 2); // step 0 (log_every) + final
}
