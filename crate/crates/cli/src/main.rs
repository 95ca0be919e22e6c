//! `spatrpm` command-line interface.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "spatrpm", version, about = "Spatially clustered regression with spanning-tree partitions")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPATRPM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model and write samples, diagnostics and a manifest.
    Fit(FitArgs),
    /// Posterior predictive means at new locations.
    Predict(PredictArgs),
    /// Score a fitted run: per-sample errors, MAE, CRPS and WAIC.
    Evaluate(EvaluateArgs),
    /// Simulate U-shape data.
    Simulate(SimulateArgs),
    /// Asymptotic sweep over sample sizes on simulated U-shape data.
    Sweep(SweepArgs),
    /// Choose rate constants by WAIC over a grid.
    WaicSelect(WaicArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Data CSV with columns s_h,s_v,x1..xd,y.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the sampler seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of iterations.
    #[arg(long)]
    pub iters: Option<u64>,
    /// Override the burn-in.
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Override the number of chains.
    #[arg(long)]
    pub chains: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    pub run: PathBuf,
    /// Training data (defaults to the path recorded in the run manifest).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// CSV of prediction points: s_h,s_v,x1..xd.
    #[arg(long)]
    pub points: PathBuf,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// The simulated U-shape truth.
    Ushape,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    pub run: PathBuf,
    /// Training data (defaults to the path recorded in the run manifest).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Reference partition for the partition and coefficient errors.
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    /// Test CSV s_h,s_v,x1..xd,y with y the true mean.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_b: f64,
    /// Lattice points per side for area computations.
    #[arg(long, default_value_t = 500)]
    pub lattice: usize,
    /// Per-sample CSV output; scalar scores go to `<out>.summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Training data CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-row true region and mean.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Noise-free test set CSV.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub test_size: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct WaicArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON run configuration (model, sampler and α constants).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,7")]
    pub c_b: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,0.5")]
    pub c_p: Vec<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::WaicSelect(a) => commands::waic_select(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": code } })
            );
            ExitCode::from(code)
        }
    }
}
