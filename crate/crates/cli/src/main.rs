//! `sps`: command-line driver for the reduction pipeline.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or input, 3 for a
//! numerical failure. Failures print the error name on stderr.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sps_core::reduced::PhiMode;
use sps_core::{Error, Result};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "sps", version, about = "Multi-bump Schrodinger-Poisson-Slater states by Lyapunov-Schmidt reduction")]
struct Cli {
    /// TOML run configuration; unset keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads for sweeps, 0 for one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Number of bumps.
    #[arg(long, short = 'k', global = true)]
    k: Option<usize>,
    /// Comma-separated values of eps, decreasing.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Comma-separated values of eps for the scaling sweep, decreasing.
    #[arg(long, global = true, value_delimiter = ',')]
    scaling_eps: Option<Vec<f64>>,
    /// Grid spacing.
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<PhiMode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the radial ground state and check its integral identities.
    GroundState {
        /// Also compute the spectrum of the linearised operator.
        #[arg(long)]
        spectrum: bool,
    },
    /// Compute the constants of the reduced energy.
    Constants {
        /// Cross-check eta by Monte Carlo with this many samples.
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Compare d times the Coulomb pair integral at this d with C3.
        #[arg(long)]
        far_field: Option<f64>,
    },
    /// Dual norm of the ansatz residual at the polygon configuration per eps.
    ResidualSweep,
    /// Solve the auxiliary equation per eps and evaluate the reduced energy.
    Auxiliary,
    /// Minimise the reduced energy per eps.
    Minimize,
    /// Fit the scaling exponents of the minimisers.
    ScalingSweep,
    /// Collect the command summaries of the output directory.
    Report,
}

fn parse_mode(s: &str) -> std::result::Result<PhiMode, String> {
    match s {
        "expansion" => Ok(PhiMode::Expansion),
        "direct" => Ok(PhiMode::Direct),
        _ => Err(format!("unknown mode '{s}', expected 'expansion' or 'direct'")),
    }
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set!(
            output_dir => c.output_dir,
            workers => c.workers,
            p => c.p,
            alpha => c.alpha,
            delta => c.delta,
            k => c.k,
            eps => c.eps_list,
            scaling_eps => c.scaling_eps_list,
            h => c.grid.h,
            mode => c.mode,
            seed => c.seed,
        );
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = cli.run_config()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build_global()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    match &cli.command {
        Command::GroundState { spectrum } => commands::ground_state(&config, *spectrum),
        Command::Constants { mc_samples, far_field } => commands::constants_cmd(&config, *mc_samples, *far_field),
        Command::ResidualSweep => commands::residual_sweep(&config),
        Command::Auxiliary => commands::auxiliary(&config),
        Command::Minimize => commands::minimize(&config),
        Command::ScalingSweep => commands::scaling(&config),
        Command::Report => commands::report(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
