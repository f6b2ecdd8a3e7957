//! Command-line front end: solve, train, sweep, noise-study and report.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::Overrides;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "pinn-ode", version, about = "Physics-informed neural network experiments for ODE benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a problem with adaptive RK45 and write the trajectory.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Number of output points (default: the evaluation grid size).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Train one network and write the report, histories and plots.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train every cell of an architecture × weights grid.
    Sweep(SweepCli),
    /// Train the Lorenz system against noisy observations at several noise levels.
    NoiseStudy {
        /// Noise standard deviations.
        #[arg(long, value_delimiter = ',', default_value = "0.2,1,3")]
        sigmas: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Summarize a previous run and redraw its plots.
    Report {
        /// Run directory, report.json or sweep.json.
        path: PathBuf,
    },
}

/// Flags shared by single-experiment commands.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Problem preset: lorenz, lotka-volterra, mass-spring or rlc.
    #[arg(long)]
    pub problem: Option<String>,
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named experiment preset (e.g. mass-spring-clean, rlc-weighted).
    #[arg(long)]
    pub preset: Option<String>,
    /// Seed; falls back to the config file, then PINN_ODE_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Adam iterations.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lbfgs_iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub neurons: Option<usize>,
    #[arg(long)]
    pub activation: Option<String>,
    /// Comma-separated loss weights.
    #[arg(long)]
    pub loss_weights: Option<String>,
    /// Number of collocation points.
    #[arg(long)]
    pub colloc: Option<usize>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cap Adam at 2000 and L-BFGS at 500 iterations.
    #[arg(long)]
    pub quick: bool,
}

impl From<&RunArgs> for Overrides {
    fn from(a: &RunArgs) -> Self {
        Overrides {
            problem: a.problem.clone(),
            config: a.config.clone(),
            preset: a.preset.clone(),
            seed: a.seed,
            epochs: a.epochs,
            lbfgs_iters: a.lbfgs_iters,
            learning_rate: a.lr,
            layers: a.layers,
            neurons: a.neurons,
            activation: a.activation.clone(),
            loss_weights: a.loss_weights.clone(),
            colloc: a.colloc,
            t_end: a.t_end,
            out: a.out.clone(),
            quick: a.quick,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepCli {
    /// TOML sweep grid; defaults to the RLC architecture grid.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated layer counts.
    #[arg(long)]
    pub layers: Option<String>,
    /// Comma-separated neuron counts.
    #[arg(long)]
    pub neurons: Option<String>,
    /// Comma-separated activations.
    #[arg(long)]
    pub activation: Option<String>,
    /// Weight sets separated by ';', e.g. "1e-7,1e3,1,1;1,1,1,1".
    #[arg(long)]
    pub loss_weights: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub colloc: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Only 3×25 sine with both weight sets, and shortened training.
    #[arg(long)]
    pub quick: bool,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve { run, points } => commands::solve(&Overrides::from(&run), points),
        Command::Train { run } => commands::train(&Overrides::from(&run)),
        Command::Sweep(s) => commands::sweep(&commands::SweepArgs {
            config: s.config,
            layers: s.layers,
            neurons: s.neurons,
            activations: s.activation,
            weight_sets: s.loss_weights,
            common: Overrides {
                seed: s.seed,
                epochs: s.epochs,
                colloc: s.colloc,
                out: s.out,
                quick: s.quick,
                ..Default::default()
            },
            workers: s.workers,
        }),
        Command::NoiseStudy { sigmas, run, workers } => commands::noise_study(&sigmas, &Overrides::from(&run), workers),
        Command::Report { path } => commands::report(&path),
    }
}
