mod commands;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hetssnet::{Ablation, TrainConfig};

#[derive(Parser)]
#[command(name = "hetssnet", version, about = "Graph-based pansharpening toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic scenes as scene_<i>/{pan,lrms,gt}.hsif
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a scene directory and write a checkpoint plus a loss log
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score a checkpoint (or precomputed images) on a dataset
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to run; omit to score `<scene>/<fused-name>.hsif` instead
        #[arg(long, conflicts_with = "fused_name", required_unless_present = "fused_name")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        fused_name: Option<String>,
        #[arg(long, value_enum, default_value_t = EvalMode::Reduced)]
        mode: EvalMode,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fuse one scene and write the result as HSIF plus a PPM preview
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Preview path; defaults to the output path with a .ppm extension
        #[arg(long)]
        preview: Option<PathBuf>,
        /// Bands shown as red, green, blue in the preview
        #[arg(long, value_delimiter = ',', default_value = "2,1,0")]
        rgb: Vec<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Print the relationship patterns of a scene's graph
    PatternsDump {
        #[arg(long)]
        scene: PathBuf,
        /// Parameters used for the embedding; fresh ones from the seed if omitted
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Compare analytic gradients with finite differences on a toy scene
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Histogram correlation table between PAN, LR-MS and reference bands
    AnalyzePriors {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 64)]
        bins: usize,
    },
    /// Time pattern generation and global aggregation over graph sizes
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        min_time_ms: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exit with status 2 if either fitted exponent exceeds this
        #[arg(long)]
        max_exponent: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EvalMode {
    Reduced,
    Full,
}

/// Hyperparameters: defaults, then `--config`, then `--set`, then the
/// dedicated flags.
#[derive(Args, Clone, Default)]
pub struct ModelArgs {
    /// `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set tau=0.2`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    ablate: Option<Ablation>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k, v)?;
        }
        if let Some(v) = self.iters {
            cfg.iters = v;
        }
        if let Some(v) = self.ablate {
            cfg.ablation = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.lr0 {
            cfg.lr0 = v;
        }
        if let Some(v) = self.batch {
            cfg.batch = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A check that ran but did not pass; exits with status 2.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    let diverged = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<hetssnet::Error>(), Some(hetssnet::Error::Divergence { .. })));
    if diverged || err.is::<CheckFailed>() {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { seed, count, size, out } => commands::synth(seed, count, size, &out),
        Command::Train { data, out, model } => commands::train(&data, &out, &model.resolve()?),
        Command::Eval {
            data,
            checkpoint,
            fused_name,
            mode,
            out,
            model,
        } => commands::eval(&data, checkpoint.as_deref(), fused_name.as_deref(), mode, out.as_deref(), &model.resolve()?),
        Command::Infer {
            checkpoint,
            scene,
            out,
            preview,
            rgb,
            model,
        } => commands::infer(&checkpoint, &scene, &out, preview.as_deref(), &rgb, &model.resolve()?),
        Command::PatternsDump { scene, checkpoint, model } => {
            commands::patterns_dump(&scene, checkpoint.as_deref(), &model.resolve()?)
        }
        Command::GradCheck { seed, eps, tolerance } => commands::grad_check(seed, eps, tolerance),
        Command::AnalyzePriors { data, bins } => commands::analyze_priors(&data, bins),
        Command::Bench {
            sizes,
            min_time_ms,
            seed,
            max_exponent,
        } => commands::bench(sizes, min_time_ms, seed, max_exponent),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
