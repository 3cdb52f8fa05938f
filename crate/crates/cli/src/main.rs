mod commands;
mod config;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Preset};

/// Rejected input: bad flags, config values or missing files. Exits with 1;
/// every other failure exits with 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(name = "contactgen", version, about = "Contact-map grasp synthesis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file overriding preset values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset: meshes, grasps, maps and a manifest
    MakeData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the contact CVAE on the train split of a manifest
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset manifest; overrides dataset.manifest in the config
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Resume from this checkpoint
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sample contact maps for an object and solve each for a grasp
    SampleSolve {
        #[command(flatten)]
        common: Common,
        /// Object mesh (OBJ or PLY)
        object: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Score a sample-solve results directory
    Eval {
        #[command(flatten)]
        common: Common,
        results: PathBuf,
        /// Manifest holding ground-truth grasps for mesh metrics
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Simulator adapter program; simulation is reported unavailable without it
        #[arg(long)]
        engine_adapter: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let load = |c: &Common| ExperimentConfig::load(c.config.as_deref(), c.preset, c.seed);
    match cli.command {
        Command::MakeData { common } => {
            let cfg = load(&common)?;
            commands::make_data(&cfg, &require_out(&common)?)
        }
        Command::Train {
            common,
            manifest,
            checkpoint,
        } => {
            let mut cfg = load(&common)?;
            if manifest.is_some() {
                cfg.dataset.manifest = manifest;
            }
            commands::train(&cfg, &require_out(&common)?, checkpoint.as_deref())
        }
        Command::SampleSolve {
            common,
            object,
            checkpoint,
            count,
        } => {
            let cfg = load(&common)?;
            commands::sample_solve(&cfg, &object, &checkpoint, count, &require_out(&common)?)
        }
        Command::Eval {
            common,
            results,
            manifest,
            engine_adapter,
        } => {
            let cfg = load(&common)?;
            let out = common.out.unwrap_or_else(|| results.clone());
            commands::eval(&cfg, &results, manifest.as_deref(), engine_adapter.as_deref(), &out)
        }
    }
}

fn require_out(c: &Common) -> anyhow::Result<PathBuf> {
    c.out.clone().ok_or_else(|| Invalid("--out is required".into()).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
