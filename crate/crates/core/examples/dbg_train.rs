use std::time::Instant;

use uvforge::mesh::{face_adjacency, normalize_mesh, Mesh};
use uvforge::metrics;
use uvforge::spatial::{ambient_occlusion, Bvh, FieldConfig};
use uvforge::synth;
use uvforge::train::{train_base, train_visibility, TrainConfig};

fn fixture(name: &str) -> Mesh {
    match name {
        "grid" => synth::flat_grid(10, 1.0).0,
        "bowl" => synth::bowl(14, 7),
        "dumbbell" => synth::dumbbell(12, 22),
        "openbox" => synth::open_box(3),
        other => panic!("unknown fixture {other}"),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).cloned().unwrap_or_else(|| "grid".into());
    let iters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(500);
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let mesh = normalize_mesh(&fixture(&mode)).unwrap();
    println!(
        "{mode}: {} vertices, {} faces",
        mesh.vertex_count(),
        mesh.face_count()
    );
    let cfg = TrainConfig {
        iterations: iters,
        lr,
        seed: 0,
        ..TrainConfig::default()
    };

    if mode == "grid" {
        let t0 = Instant::now();
        let r = train_base(&mesh, &cfg).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let last = r.loss_trace.last().unwrap();
        println!(
            "base: {:.1} ms/iter, final wrap {:.5} ddl {:.5} tdl {:.5} total {:.5}",
            dt * 1e3 / iters as f64,
            last.wrap,
            last.ddl,
            last.tdl,
            last.total
        );
        println!(
            "conformality {:.4}, equiareality {:.4}",
            metrics::conformality(&mesh, &r.uv),
            metrics::equiareality(&mesh, &r.uv)
        );
        return;
    }

    // Cavity fixtures: base vs visibility seam exposure.
    let bvh = Bvh::build(&mesh);
    let fields = FieldConfig {
        rng_seed: 0,
        ..FieldConfig::default()
    };
    let ao = ambient_occlusion(&mesh, &bvh, &fields);
    let mean_ao = ao.values.iter().sum::<f64>() / ao.values.len() as f64;
    let min_ao = ao.values.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("ao: mean {mean_ao:.3}, min {min_ao:.3}");

    let t0 = Instant::now();
    let base = train_base(&mesh, &cfg).unwrap();
    let t_base = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let vis = train_visibility(&mesh, &ao, &cfg).unwrap();
    let t_vis = t0.elapsed().as_secs_f64();

    let adjacency = face_adjacency(&mesh);
    let report = |name: &str, uv: &[[f64; 2]], secs: f64| {
        let mask = metrics::seam_vertices_hard(&adjacency, uv, 0.1);
        let n_seam = mask.iter().filter(|&&m| m).count();
        let seam_ao = metrics::mean_seam_ao(&mask, &ao.values);
        println!(
            "{name}: {secs:.0}s, seam verts {n_seam}, mean seam ao {:?}, conformality {:.4}",
            seam_ao.map(|v| (v * 1e4).round() / 1e4),
            metrics::conformality(&mesh, uv),
        );
        seam_ao
    };
    let a = report("base      ", &base.uv, t_base);
    let b = report("visibility", &vis.uv, t_vis);
    if let (Some(a), Some(b)) = (a, b) {
        println!(
            "seam-ao reduction: {:.1}% (need >= 15%)",
            (1.0 - b / a) * 100.0
        );
    }
    let last = vis.loss_trace.last().unwrap();
    println!(
        "vis last: wrap {:.5} ao {:.4} total {:.5}",
        last.wrap, last.ao, last.total
    );
}
