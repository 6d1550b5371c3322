use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddcc_cli::commands::{cmd_moments, cmd_oracle, cmd_solve, cmd_sweep, cmd_verify, VerifyOptions};
use ddcc_cli::{CliError, GlobalOptions, SolverFlags, EXIT_INPUT};
use ddcc_core::game::Orientation;

/// Stackelberg–Nash games with decision-dependent chance constraints.
#[derive(Debug, Parser)]
#[command(name = "ddcc", version)]
struct Cli {
    /// Lower-level fixed-point tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Leader grid points (solve, sweep) or probe grid points (verify).
    #[arg(long, global = true)]
    grid: Option<usize>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Also write the result to this file (sweep: the CSV).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override every bilinear follower's sign convention.
    #[arg(long, global = true, value_parser = parse_orientation)]
    orientation: Option<Orientation>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct IterationArgs {
    /// Best-response sweeps before giving up.
    #[arg(long)]
    max_sweeps: Option<usize>,

    /// Step fraction toward each best response, in (0, 1].
    #[arg(long)]
    damping: Option<f64>,

    /// Scan several lower-level starts and keep the leader-best point.
    #[arg(long)]
    optimistic: bool,
}

impl From<IterationArgs> for SolverFlags {
    fn from(a: IterationArgs) -> Self {
        SolverFlags {
            max_sweeps: a.max_sweeps,
            damping: a.damping,
            optimistic: a.optimistic,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute an equilibrium and print it as JSON.
    Solve {
        spec: PathBuf,
        #[command(flatten)]
        iteration: IterationArgs,
    },
    /// Solve once per risk weight and emit a CSV table.
    Sweep {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        rho: Vec<f64>,
        #[command(flatten)]
        iteration: IterationArgs,
    },
    /// Check a candidate point and the game's standing assumptions.
    Verify {
        spec: PathBuf,
        point: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Re-solve the followers at every leader probe.
        #[arg(long)]
        bilevel: bool,
        /// Random probes per follower for the convexity test.
        #[arg(long, default_value_t = 1000)]
        probes: usize,
    },
    /// Compare the closed-form worst-case probability with a grid search.
    Oracle {
        #[arg(long, allow_hyphen_values = true)]
        slack: f64,
        #[arg(long)]
        spread: f64,
        #[arg(long)]
        gamma1: f64,
        #[arg(long)]
        gamma2: f64,
        #[arg(long, default_value_t = 400)]
        grid_n: usize,
    },
    /// Mean and variance of a `value` column.
    Moments {
        samples: PathBuf,
        #[arg(long, default_value_t = 0)]
        follower: usize,
    },
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    s.parse().map_err(|e: ddcc_core::Error| e.to_string())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut opts = GlobalOptions {
        tol: cli.tol,
        grid: cli.grid,
        seed: cli.seed,
        out: cli.out,
        orientation: cli.orientation,
        solver: SolverFlags::default(),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match cli.command {
        Command::Solve { spec, iteration } => {
            opts.solver = iteration.into();
            cmd_solve(&spec, &opts, &mut out)?
        }
        Command::Sweep {
            spec,
            rho,
            iteration,
        } => {
            opts.solver = iteration.into();
            cmd_sweep(&spec, &rho, &opts, &mut out)?
        }
        Command::Verify {
            spec,
            point,
            eps,
            bilevel,
            probes,
        } => {
            let vopts = VerifyOptions {
                eps,
                bilevel,
                probes,
            };
            cmd_verify(&spec, &point, &vopts, &opts, &mut out)?
        }
        Command::Oracle {
            slack,
            spread,
            gamma1,
            gamma2,
            grid_n,
        } => cmd_oracle(slack, spread, gamma1, gamma2, grid_n, &mut out)?,
        Command::Moments { samples, follower } => cmd_moments(&samples, follower, &mut out)?,
    };
    out.flush()?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .format_timestamp(None)
        .parse_default_env()
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
