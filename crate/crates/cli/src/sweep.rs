//! Risk-weight sweeps: solve the game once per `ρ` and tabulate the results.

use std::io::Write;

use ddcc_core::game::GameSpec;
use ddcc_core::solver::{leader_optimize, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{sig6, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub leader_payoff: Option<f64>,
    /// Family formula values `φ_i` at the equilibrium.
    pub follower_payoffs: Vec<f64>,
    /// The minimized objectives, which differ from `follower_payoffs` in sign
    /// of the own term under the table-reproducing orientation.
    pub follower_objectives: Vec<f64>,
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(SweepRow::is_ok)
    }
}

fn solve_row(g: &GameSpec, rho: f64, cfg: &SolverConfig) -> SweepRow {
    let solved = g
        .with_risk_scale(rho)
        .and_then(|scaled| leader_optimize(&scaled, cfg));
    match solved {
        Ok(pt) => SweepRow {
            rho,
            x_star: pt.x_star,
            y_star: pt.y_star,
            leader_payoff: Some(pt.leader_payoff),
            follower_payoffs: pt.follower_nominal_payoffs,
            follower_objectives: pt.follower_payoffs,
            status: "ok".to_string(),
        },
        Err(e) => {
            log::warn!("rho = {rho}: {e}");
            SweepRow {
                rho,
                x_star: Vec::new(),
                y_star: Vec::new(),
                leader_payoff: None,
                follower_payoffs: Vec::new(),
                follower_objectives: Vec::new(),
                status: e.to_string(),
            }
        }
    }
}

/// Solves every `ρ` (concurrently) and returns the rows in ascending `ρ`.
pub fn run_sweep(g: &GameSpec, rhos: &[f64], cfg: &SolverConfig) -> CliResult<SweepResult> {
    if rhos.is_empty() {
        return Err(CliError::Usage("--rho needs at least one value".into()));
    }
    if let Some(bad) = rhos.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(CliError::Usage(format!("every rho must be > 0, got {bad}")));
    }
    cfg.validate()?;
    let mut sorted = rhos.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = sorted.par_iter().map(|&rho| solve_row(g, rho, cfg)).collect();
    Ok(SweepResult { rows })
}

/// CSV with header `rho,x_star,y1..yI,leader_payoff,phi1..phiI,status`.
/// Leader strategies with several coordinates get `x_star1..x_starM`.
pub fn write_csv<W: Write>(result: &SweepResult, dim: usize, followers: usize, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rho".to_string()];
    if dim == 1 {
        header.push("x_star".into());
    } else {
        header.extend((1..=dim).map(|j| format!("x_star{j}")));
    }
    header.extend((1..=followers).map(|i| format!("y{i}")));
    header.push("leader_payoff".into());
    header.extend((1..=followers).map(|i| format!("phi{i}")));
    header.push("status".into());
    w.write_record(&header)?;

    for row in &result.rows {
        let mut rec = vec![sig6(row.rho)];
        let cells = |values: &[f64], n: usize| -> Vec<String> {
            if values.len() == n {
                values.iter().map(|v| sig6(*v)).collect()
            } else {
                vec![String::new(); n]
            }
        };
        rec.extend(cells(&row.x_star, dim));
        rec.extend(cells(&row.y_star, followers));
        rec.push(row.leader_payoff.map(sig6).unwrap_or_default());
        rec.extend(cells(&row.follower_payoffs, followers));
        rec.push(row.status.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(result: &SweepResult, dim: usize, followers: usize) -> CliResult<String> {
    let mut buf = Vec::new();
    write_csv(result, dim, followers, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
