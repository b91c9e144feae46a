mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{grid_flag, parse_pair, BranchName, FileConfig, Grid, ParamFlags};

/// Traveling waves of the logarithmic Keller-Segel model.
#[derive(Debug, Parser)]
#[command(name = "kstw", version)]
struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    rtol: Option<f64>,
    #[arg(long, global = true)]
    atol: Option<f64>,
    /// Seed for randomized sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(flatten)]
    params: ParamFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibria with eigenvalues and stability labels.
    Equilibria,
    /// Trajectories from a grid of starting points.
    Portrait {
        /// `lo:hi:n` or a comma-separated list.
        #[arg(long, value_parser = grid_flag, allow_hyphen_values = true)]
        v_grid: Option<Grid>,
        #[arg(long, value_parser = grid_flag, allow_hyphen_values = true)]
        w_grid: Option<Grid>,
        /// Maximum integration span in each direction.
        #[arg(long)]
        span: Option<f64>,
    },
    /// Critical threshold w0* at a given v0.
    Shoot {
        #[arg(long, allow_hyphen_values = true)]
        v0: Option<f64>,
        /// Initial bisection bracket `lo,hi`.
        #[arg(long, value_parser = parse_pair)]
        bracket: Option<(f64, f64)>,
    },
    /// Reconstructed (u, S) profile.
    Profile {
        #[arg(long)]
        w0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        v0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        s0: Option<f64>,
        #[arg(long = "S0")]
        big_s0: Option<f64>,
        /// Saturated fronts: above or below the parabola.
        #[arg(long, value_enum)]
        branch: Option<BranchName>,
        /// Start from the threshold w0* instead of --w0.
        #[arg(long)]
        critical: bool,
    },
    /// Regime, threshold and profile types over a parameter grid.
    Sweep {
        #[arg(long, value_parser = grid_flag, allow_hyphen_values = true)]
        a_values: Option<Grid>,
        /// Speeds as multiples of sigma* (of v* when sigma* = 0).
        #[arg(long, value_parser = grid_flag, allow_hyphen_values = true)]
        sigma_factors: Option<Grid>,
        /// v0 as a multiple of v*.
        #[arg(long)]
        v0_factor: Option<f64>,
        /// Random w0 checked against the threshold at each point.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<kstw::Error> for CliError {
    fn from(e: kstw::Error) -> Self {
        use kstw::Error::*;
        match e {
            InvalidParams(_) | RegimeViolation(_) | DegenerateThreshold { .. } | AnchorMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    file.params = file.params.overlay(&cli.params);
    let run = commands::Run {
        params: file.params.clone(),
        out: cli.out.or(file.out.clone()).unwrap_or_else(|| PathBuf::from("kstw-out")),
        rtol: cli.rtol.or(file.rtol),
        atol: cli.atol.or(file.atol),
        seed: cli.seed.or(file.seed).unwrap_or(0),
    };
    match cli.command {
        Command::Equilibria => commands::equilibria(&run),
        Command::Portrait { v_grid, w_grid, span } => {
            let c = file.portrait;
            commands::portrait(&run, v_grid.map(|g| g.0).or(c.v_grid), w_grid.map(|g| g.0).or(c.w_grid), span.or(c.span))
        }
        Command::Shoot { v0, bracket } => commands::shoot(&run, v0.or(file.shoot.v0), bracket.or(file.shoot.bracket)),
        Command::Profile { w0, v0, s0, big_s0, branch, critical } => {
            let c = file.profile;
            commands::profile(
                &run,
                commands::ProfileRequest {
                    w0: w0.or(c.w0),
                    v0: v0.or(c.v0),
                    s0: s0.or(c.s0).unwrap_or(0.0),
                    big_s0: big_s0.or(c.big_s0).unwrap_or(1.0),
                    branch: branch.or(c.branch),
                    critical: critical || c.critical.unwrap_or(false),
                },
            )
        }
        Command::Sweep { a_values, sigma_factors, v0_factor, samples } => {
            let c = file.sweep;
            commands::sweep(
                &run,
                a_values.map(|g| g.0).or(c.a_values).unwrap_or_else(|| vec![0.5, 1.0, 2.0]),
                sigma_factors.map(|g| g.0).or(c.sigma_factors).unwrap_or_else(|| vec![0.5, 1.5]),
                v0_factor.or(c.v0_factor).unwrap_or(2.0),
                samples.or(c.samples).unwrap_or(0),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kstw: {e}");
            ExitCode::from(e.code())
        }
    }
}
