use std::io::Write;
use std::path::Path;

use ddcc_core::ambiguity::SampleSet;
use ddcc_core::cantelli::{
    worst_case_probability, worst_case_probability_grid, ProbabilityBound, WorstCaseQuery,
};
use ddcc_core::game::{load_spec, parse_spec_unchecked, GameSpec};
use ddcc_core::solver::{leader_optimize, EquilibriumPoint};
use ddcc_core::verify::{
    check_assumptions, verify_equilibrium, AssumptionReport, EquilibriumCertificate, LeaderCheck,
};
use serde::{Deserialize, Serialize};

use crate::sweep::{csv_string, run_sweep};
use crate::{
    read_text, write_text, CliResult, GlobalOptions, DEFAULT_VERIFY_GRID, EXIT_CERTIFICATE,
    EXIT_NON_CONVERGENCE, EXIT_OK,
};

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn apply_orientation(g: GameSpec, opts: &GlobalOptions) -> GameSpec {
    match opts.orientation {
        Some(o) => g.with_orientation(o),
        None => g,
    }
}

pub fn load_game(path: &Path, opts: &GlobalOptions) -> CliResult<GameSpec> {
    let g = load_spec(&read_text(path)?)?;
    Ok(apply_orientation(g, opts))
}

pub fn cmd_solve(spec: &Path, opts: &GlobalOptions, out: &mut dyn Write) -> CliResult<i32> {
    let g = load_game(spec, opts)?;
    let pt = leader_optimize(&g, &opts.solver_config())?;
    if pt.diagnostics.multiplicity_warning {
        log::warn!("several lower-level equilibria suspected at x* = {:?}", pt.x_star);
    }
    if let Some(path) = &opts.out {
        write_text(path, &serde_json::to_string_pretty(&pt)?)?;
    }
    print_json(out, &pt)?;
    Ok(EXIT_OK)
}

/// Without `--out` the CSV goes to `out`; with it, the CSV goes to the file
/// and the full result is printed as JSON.
pub fn cmd_sweep(
    spec: &Path,
    rhos: &[f64],
    opts: &GlobalOptions,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let g = load_game(spec, opts)?;
    let result = run_sweep(&g, rhos, &opts.solver_config())?;
    let csv = csv_string(&result, g.dim(), g.num_followers())?;
    match &opts.out {
        Some(path) => {
            write_text(path, &csv)?;
            print_json(out, &result)?;
        }
        None => out.write_all(csv.as_bytes())?,
    }
    for row in result.rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("rho = {}: {}", row.rho, row.status);
    }
    Ok(if result.all_ok() {
        EXIT_OK
    } else {
        EXIT_NON_CONVERGENCE
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub assumptions: AssumptionReport,
    pub certificate: Option<EquilibriumCertificate>,
    /// Why no certificate could be issued.
    pub error: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub eps: f64,
    /// Re-solve the followers at every leader probe.
    pub bilevel: bool,
    pub probes: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            eps: 1e-6,
            bilevel: false,
            probes: 1000,
        }
    }
}

/// The spec is parsed leniently so that assumption failures are reported
/// (exit 3) rather than rejected as input errors.
pub fn cmd_verify(
    spec: &Path,
    point: &Path,
    vopts: &VerifyOptions,
    opts: &GlobalOptions,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let g = apply_orientation(parse_spec_unchecked(&read_text(spec)?)?, opts);
    let pt: EquilibriumPoint = serde_json::from_str(&read_text(point)?)?;
    let assumptions = check_assumptions(&g, vopts.probes, opts.seed);

    let mut report = VerifyReport {
        passed: false,
        certificate: None,
        error: None,
        assumptions,
    };
    if !report.assumptions.passed {
        for c in report.assumptions.failures() {
            let evidence = c.evidence.as_deref().unwrap_or("");
            eprintln!("assumption failed: {}: {evidence}", c.check);
        }
        for c in report.assumptions.convexity.iter().filter(|c| !c.passed) {
            eprintln!(
                "follower {} is not convex in its own strategy ({} of {} probes)",
                c.follower, c.violations, c.probes
            );
        }
        report.error = Some("game fails its standing assumptions".into());
        print_json(out, &report)?;
        return Ok(EXIT_CERTIFICATE);
    }

    let mode = if vopts.bilevel {
        LeaderCheck::Bilevel(opts.solver_config())
    } else {
        LeaderCheck::Literal
    };
    let grid = opts.grid.unwrap_or(DEFAULT_VERIFY_GRID);
    match verify_equilibrium(&g, &pt.x_star, &pt.y_star, grid, vopts.eps, &mode) {
        Ok(cert) => {
            report.passed = cert.passed;
            report.certificate = Some(cert);
        }
        Err(e @ ddcc_core::Error::InfeasiblePoint(_)) => {
            eprintln!("{e}");
            report.error = Some(e.to_string());
        }
        Err(e) => return Err(e.into()),
    }
    print_json(out, &report)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_CERTIFICATE })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub query: WorstCaseQuery,
    pub grid_n: usize,
    pub closed_form: ProbabilityBound,
    pub grid: ProbabilityBound,
    /// Absolute gap with infeasible read as probability 0.
    pub gap: f64,
}

pub fn oracle_comparison(q: WorstCaseQuery, grid_n: usize) -> CliResult<OracleComparison> {
    let closed_form = worst_case_probability(&q)?;
    let grid = worst_case_probability_grid(&q, grid_n)?;
    Ok(OracleComparison {
        gap: (closed_form.as_probability() - grid.as_probability()).abs(),
        query: q,
        grid_n,
        closed_form,
        grid,
    })
}

pub fn cmd_oracle(
    slack: f64,
    spread: f64,
    gamma1: f64,
    gamma2: f64,
    grid_n: usize,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let q = WorstCaseQuery::new(slack, spread, gamma1, gamma2)?;
    print_json(out, &oracle_comparison(q, grid_n)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub follower: usize,
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
}

pub fn cmd_moments(path: &Path, follower: usize, out: &mut dyn Write) -> CliResult<i32> {
    let text = read_text(path)?;
    let set = SampleSet::from_csv_reader(follower, text.as_bytes())?;
    let m = set.moments();
    print_json(
        out,
        &MomentSummary {
            follower,
            samples: set.len(),
            mean: m.mean,
            variance: m.variance,
        },
    )?;
    Ok(EXIT_OK)
}
