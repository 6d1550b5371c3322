//! Command implementations behind the `ddcc` binary.
//!
//! Every command writes its machine-readable payload to the given writer and
//! returns the process exit code; diagnostics go to standard error.

use std::path::{Path, PathBuf};

use ddcc_core::game::Orientation;
use ddcc_core::solver::{LowerSelect, SolverConfig};
use thiserror::Error;

pub mod commands;
pub mod sweep;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NON_CONVERGENCE: i32 = 2;
pub const EXIT_CERTIFICATE: i32 = 3;

pub const DEFAULT_LEADER_GRID: usize = 257;
pub const DEFAULT_VERIFY_GRID: usize = 1001;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ddcc_core::Error),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("output: {0}")]
    Output(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(ddcc_core::Error::NonConvergence(_)) => EXIT_NON_CONVERGENCE,
            _ => EXIT_INPUT,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    /// Lower-level fixed-point tolerance.
    pub tol: Option<f64>,
    /// Leader grid for `solve`/`sweep`, probe grid for `verify`.
    pub grid: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub orientation: Option<Orientation>,
    pub solver: SolverFlags,
}

/// Lower-level iteration settings exposed by `solve` and `sweep`.
#[derive(Debug, Clone, Default)]
pub struct SolverFlags {
    pub max_sweeps: Option<usize>,
    pub damping: Option<f64>,
    pub optimistic: bool,
}

impl GlobalOptions {
    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig {
            seed: self.seed,
            leader_grid: self.grid.unwrap_or(DEFAULT_LEADER_GRID),
            ..SolverConfig::default()
        };
        if let Some(tol) = self.tol {
            cfg.fixed_point_tol = tol;
        }
        if let Some(n) = self.solver.max_sweeps {
            cfg.max_sweeps = n;
        }
        if let Some(d) = self.solver.damping {
            cfg.damping = d;
        }
        if self.solver.optimistic {
            cfg.lower_select = LowerSelect::OptimisticScan;
        }
        cfg
    }
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Formats `v` with 6 significant digits and no trailing zeros.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("scientific output parses");
    rounded.to_string()
}
