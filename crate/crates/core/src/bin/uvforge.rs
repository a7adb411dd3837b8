//! Command-line entry point: segment, param, eval, export, rerun.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uvforge::cli::{self, ExportKind};
use uvforge::manifest::RunConfig;

#[derive(Parser)]
#[command(
    name = "uvforge",
    version,
    about = "Semantic- and visibility-aware UV parameterization of triangle meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigFlags {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Semantic part count K.
    #[arg(long)]
    k: Option<usize>,
    /// Training iterations T.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight of the seam-visibility objective.
    #[arg(long)]
    lambda_vis: Option<f64>,
    /// Seam threshold as a fraction of the UV bounding square.
    #[arg(long)]
    tau_scale: Option<f64>,
    /// Atlas cell padding in [0, 0.5).
    #[arg(long)]
    pad: Option<f64>,
    #[arg(long)]
    ao_samples: Option<u32>,
    #[arg(long)]
    shdf_rays: Option<u32>,
    /// Worker threads (or set UVFORGE_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (defaults to the input's directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ConfigFlags {
    fn resolve(&self, pipeline: Option<&str>) -> Result<RunConfig, uvforge::Error> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            pipeline: pipeline.map(|s| s.to_string()),
            k: self.k,
            iterations: self.iters,
            lr: self.lr,
            seed: self.seed,
            lambda_vis: self.lambda_vis,
            tau_scale: self.tau_scale,
            pad: self.pad,
            ao_samples: self.ao_samples,
            shdf_rays: self.shdf_rays,
            threads: self.threads,
        };
        Ok(base.merged_with(&flags))
    }

    fn out_dir(&self, input: &PathBuf) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| input.parent().unwrap_or(&PathBuf::from(".")).to_path_buf())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Partition a mesh into semantic parts from its thickness field.
    Segment {
        input: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Learn a UV parameterization (base | visibility | semantic |
    /// semantic_visibility).
    Param {
        input: PathBuf,
        #[arg(long, default_value = "base")]
        pipeline: String,
        /// Pre-computed labels.json for the semantic pipelines.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Evaluate a UV-mapped OBJ: conformality, equiareality, seam statistics.
    Eval {
        input: PathBuf,
        /// Also compute ambient occlusion and seam-AO statistics.
        #[arg(long)]
        ao: bool,
        /// Candidate labels.json (with --ref-labels enables hamming/rand).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Reference labels.json.
        #[arg(long)]
        ref_labels: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Write visual artifacts (atlas-svg | checker) for a UV-mapped OBJ.
    Export {
        input: PathBuf,
        #[arg(long)]
        kind: String,
        /// Optional labels.json for per-part atlas colors.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Re-run a recorded manifest (bitwise reproducible at a fixed thread
    /// count).
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn run() -> Result<(), uvforge::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Segment { input, flags } => {
            cli::setup_threads(flags.threads);
            let cfg = flags.resolve(None)?;
            let m = cli::cmd_segment(&input, &flags.out_dir(&input), &cfg)?;
            for o in &m.outputs {
                println!("wrote {}", o.display());
            }
            Ok(())
        }
        Command::Param {
            input,
            pipeline,
            labels,
            flags,
        } => {
            cli::setup_threads(flags.threads);
            let cfg = flags.resolve(Some(&pipeline))?;
            let m = cli::cmd_param(&input, &flags.out_dir(&input), &cfg, labels.as_deref())?;
            for o in &m.outputs {
                println!("wrote {}", o.display());
            }
            Ok(())
        }
        Command::Eval {
            input,
            ao,
            labels,
            ref_labels,
            flags,
        } => {
            cli::setup_threads(flags.threads);
            let cfg = flags.resolve(None)?;
            let report = cli::cmd_eval(
                &input,
                &flags.out_dir(&input),
                &cfg,
                ao,
                labels.as_deref(),
                ref_labels.as_deref(),
            )?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(())
        }
        Command::Export {
            input,
            kind,
            labels,
            flags,
        } => {
            cli::setup_threads(flags.threads);
            let kind: ExportKind = kind.parse()?;
            let m = cli::cmd_export(&input, &flags.out_dir(&input), kind, labels.as_deref())?;
            for o in &m.outputs {
                println!("wrote {}", o.display());
            }
            Ok(())
        }
        Command::Rerun {
            manifest,
            out_dir,
            threads,
        } => {
            cli::setup_threads(threads);
            let dir = out_dir.unwrap_or_else(|| {
                manifest
                    .parent()
                    .unwrap_or(std::path::Path::new("."))
                    .to_path_buf()
            });
            let m = cli::cmd_rerun(&manifest, &dir)?;
            for o in &m.outputs {
                println!("wrote {}", o.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
