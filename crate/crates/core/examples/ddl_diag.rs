use uvforge::mesh::normalize_mesh;
use uvforge::metrics;
use uvforge::synth;
use uvforge::train::{train_base, TrainConfig};

fn main() {
    let (mesh, _) = synth::flat_grid(10, 1.0);
    let mesh = normalize_mesh(&mesh).unwrap();
    for w_ddl in [0.01, 0.05, 0.1] {
        let mut cfg = TrainConfig {
            iterations: 1500,
            seed: 0,
            ..TrainConfig::default()
        };
        cfg.weights.w_ddl = w_ddl;
        let r = train_base(&mesh, &cfg).unwrap();
        let last = r.loss_trace.last().unwrap();
        println!(
            "w_ddl {w_ddl}: conformality {:.4} equiareality {:.4} (ddl {:.4} wrap {:.5})",
            metrics::conformality(&mesh, &r.uv),
            metrics::equiareality(&mesh, &r.uv),
            last.ddl,
            last.wrap
        );
    }
}
