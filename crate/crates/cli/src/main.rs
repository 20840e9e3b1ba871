//! `skelgen`: dataset construction, skeletonization, toy training,
//! sampling and evaluation.
//!
//! Every command takes `--profile`, `--config` (key=value file, unknown keys
//! rejected), `--seed` and `--out`. Flags win over config values, which win
//! over profile defaults. Exit codes: 0 ok, 1 usage, 2 input, 3 numeric.

mod commands;
mod files;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::{Failure, Profile};

#[derive(Parser, Debug)]
#[command(name = "skelgen", version, about = "Skeleton-guided shape reconstruction and generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Default set: general (2560 pts, n_s 256, p 0.3, 100^3), vessel
    /// (4096 pts, n_s 400, p 0.1, 100^3) or toy (2560 pts, n_s 32, p 1, 32^3, lr 0.01, 60% in-band samples)
    #[arg(long, value_enum, default_value_t = Profile::General)]
    pub profile: Profile,
    /// key=value file merged under the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize a watertight mesh and write its point cloud, SDF volume and transform
    BuildSdf(commands::BuildSdf),
    /// Extract a skeleton (points + radii) from a point cloud
    Skeletonize(commands::Skeletonize),
    /// Fit the auto-encoder to one shape (toy sizes only)
    TrainToy(commands::TrainToy),
    /// Encode a shape with a trained model and extract its surface
    Reconstruct(commands::Reconstruct),
    /// Fit a small latent denoiser to latent files
    TrainDenoiser(commands::TrainDenoiser),
    /// Sample latents with the probability-flow ODE and decode them to meshes
    Sample(commands::Sample),
    /// Reconstruction metrics (CD, EMD, HD, F1) for one prediction
    EvalRecon(commands::EvalRecon),
    /// Generation metrics (MMD, COV, 1-NNA; optional feature distances) for two shape sets
    EvalGen(commands::EvalGen),
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("SKELGEN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("SKELGEN_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::BuildSdf(a) => commands::build_sdf(a),
        Command::Skeletonize(a) => commands::skeletonize(a),
        Command::TrainToy(a) => commands::train_toy(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::TrainDenoiser(a) => commands::train_denoiser(a),
        Command::Sample(a) => commands::sample(a),
        Command::EvalRecon(a) => commands::eval_recon(a),
        Command::EvalGen(a) => commands::eval_gen(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("skelgen: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
