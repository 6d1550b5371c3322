//! Equilibrium computation.
//!
//! The lower level is a Nash game among followers, each minimizing a convex
//! function of its own scalar strategy over an interval (its box cut by the
//! cone constraint). It is solved by damped Gauss–Seidel best-response
//! sweeps; each best response is a golden-section search checked against the
//! interval endpoints.
//!
//! The upper level maximizes the marginal value `V(x) = f(x, y*(x))`. `V` is
//! only upper semicontinuous in general, so the leader uses a uniform grid
//! (cyclic coordinate lines when `m > 1`) followed by golden-section
//! refinement around the incumbent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::game::GameSpec;
use crate::search::golden_section_min;
use crate::{Error, Interval, Result};

/// Minimizers farther apart than this are reported as distinct.
const DISTINCT_RESPONSE: f64 = 1e-6;

/// Cone residual above `-ACTIVE_TOL·max(1, |b|)` marks a constraint active.
const ACTIVE_TOL: f64 = 1e-8;

/// Upper bound on cyclic coordinate passes for `m > 1`.
const MAX_COORDINATE_PASSES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerSelect {
    /// Report the point the deterministic iteration reaches from the origin.
    #[default]
    Iterate,
    /// Iterate from several starts and keep the leader-best converged point.
    OptimisticScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub fixed_point_tol: f64,
    pub max_sweeps: usize,
    pub br_tol: f64,
    /// Grid points per leader dimension.
    pub leader_grid: usize,
    pub leader_refine_tol: f64,
    pub damping: f64,
    pub seed: u64,
    pub lower_select: LowerSelect,
    /// Extra random starts used by [`LowerSelect::OptimisticScan`].
    pub scan_starts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            fixed_point_tol: 1e-9,
            max_sweeps: 10_000,
            br_tol: 1e-10,
            leader_grid: 257,
            leader_refine_tol: 1e-8,
            damping: 1.0,
            seed: 0,
            lower_select: LowerSelect::Iterate,
            scan_starts: 8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fixed_point_tol", self.fixed_point_tol),
            ("br_tol", self.br_tol),
            ("leader_refine_tol", self.leader_refine_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(
                "damping",
                format!("must lie in (0, 1], got {}", self.damping),
            ));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps", "must be >= 1"));
        }
        if self.leader_grid < 2 {
            return Err(Error::invalid(
                "leader_grid",
                format!("must be >= 2, got {}", self.leader_grid),
            ));
        }
        Ok(())
    }
}

/// Outcome of a lower-level iteration that ran out of sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonConvergenceReport {
    pub x: Vec<f64>,
    pub sweeps: usize,
    /// Max per-follower move in each sweep.
    pub residuals: Vec<f64>,
    pub last_y: Vec<f64>,
}

impl NonConvergenceReport {
    pub fn last_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashSolution {
    pub y: Vec<f64>,
    pub sweeps: usize,
    pub residuals: Vec<f64>,
    /// Some follower had several distinct minimizers in the final sweep.
    pub non_unique: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub y: f64,
    pub value: f64,
    pub non_unique: bool,
}

/// Minimizer of follower `i`'s objective over its feasible interval at `x`,
/// with the others fixed at `y` (the `i`-th entry of `y` is ignored).
/// When the objective is flat to within `br_tol` over the interval, `prev_y`
/// (projected onto the interval) is kept.
pub fn best_response(
    g: &GameSpec,
    i: usize,
    x: &[f64],
    y: &[f64],
    prev_y: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    best_response_detail(g, i, x, y, prev_y, cfg).map(|r| r.y)
}

pub fn best_response_detail(
    g: &GameSpec,
    i: usize,
    x: &[f64],
    y: &[f64],
    prev_y: f64,
    cfg: &SolverConfig,
) -> Result<BestResponse> {
    if y.len() != g.num_followers() {
        return Err(Error::DimensionMismatch {
            expected: g.num_followers(),
            got: y.len(),
        });
    }
    let interval = g
        .feasible_interval(i, x)?
        .ok_or_else(|| Error::EmptyFeasibleSet {
            follower: i,
            x: x.to_vec(),
        })?;
    Ok(respond(g, i, x, y, interval, prev_y, cfg.br_tol))
}

fn respond(
    g: &GameSpec,
    i: usize,
    x: &[f64],
    y: &[f64],
    interval: Interval,
    prev_y: f64,
    br_tol: f64,
) -> BestResponse {
    let objective = |v: f64| g.follower_objective_at(i, x, y, v);
    let anchor = interval.clamp(prev_y);
    let interior = golden_section_min(objective, interval, br_tol);

    let mut candidates = vec![interval.lo, interval.hi, anchor];
    // an interior probe hugging an endpoint is the endpoint
    let near_end = (interior.x - interval.lo).abs() <= 10.0 * br_tol
        || (interior.x - interval.hi).abs() <= 10.0 * br_tol;
    if !near_end {
        candidates.push(interior.x);
    }
    let values: Vec<f64> = candidates.iter().map(|&c| objective(c)).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);

    // flat across every candidate: every point of the interval is optimal
    let flat = values.iter().all(|&v| v <= best + br_tol);
    let pick = if flat {
        2
    } else {
        (0..candidates.len())
            .filter(|&k| values[k] == best)
            .min_by(|&a, &b| {
                let da = (candidates[a] - anchor).abs();
                let db = (candidates[b] - anchor).abs();
                da.total_cmp(&db)
            })
            .expect("at least one candidate attains the minimum")
    };
    BestResponse {
        y: candidates[pick],
        value: values[pick],
        non_unique: flat && interval.width() > DISTINCT_RESPONSE,
    }
}

fn check_leader_point(g: &GameSpec, x: &[f64]) -> Result<()> {
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: x.len(),
        });
    }
    if x
        .iter()
        .zip(&g.leader().bounds)
        .any(|(v, b)| !b.contains_within(*v, 1e-9))
    {
        return Err(Error::OutOfBox {
            what: "x".into(),
            value: x.to_vec(),
            bounds: g.leader().bounds.iter().map(|&b| b.into()).collect(),
        });
    }
    Ok(())
}

/// Every follower's feasible interval at `x`, or the first empty one.
pub fn feasible_intervals(g: &GameSpec, x: &[f64]) -> Result<Vec<Interval>> {
    (0..g.num_followers())
        .map(|i| {
            g.feasible_interval(i, x)?.ok_or_else(|| Error::EmptyFeasibleSet {
                follower: i,
                x: x.to_vec(),
            })
        })
        .collect()
}

/// Gauss–Seidel best-response iteration at leader strategy `x`.
///
/// Stops when a whole sweep moves no follower by more than
/// `fixed_point_tol`. Running out of sweeps is reported as
/// [`Error::NonConvergence`] with the residual trace.
pub fn nash_fixed_point(
    g: &GameSpec,
    x: &[f64],
    y_init: &[f64],
    cfg: &SolverConfig,
) -> Result<NashSolution> {
    cfg.validate()?;
    check_leader_point(g, x)?;
    if y_init.len() != g.num_followers() {
        return Err(Error::DimensionMismatch {
            expected: g.num_followers(),
            got: y_init.len(),
        });
    }
    let intervals = feasible_intervals(g, x)?;
    iterate(g, x, y_init, &intervals, cfg)
}

fn iterate(
    g: &GameSpec,
    x: &[f64],
    y_init: &[f64],
    intervals: &[Interval],
    cfg: &SolverConfig,
) -> Result<NashSolution> {
    let mut y: Vec<f64> = y_init
        .iter()
        .zip(intervals)
        .map(|(v, iv)| iv.clamp(*v))
        .collect();
    let mut residuals = Vec::new();
    for sweep in 1..=cfg.max_sweeps {
        let mut residual: f64 = 0.0;
        let mut non_unique = false;
        for i in 0..y.len() {
            let br = respond(g, i, x, &y, intervals[i], y[i], cfg.br_tol);
            let next = if cfg.damping == 1.0 {
                br.y
            } else {
                y[i] + cfg.damping * (br.y - y[i])
            };
            residual = residual.max((next - y[i]).abs());
            non_unique |= br.non_unique;
            y[i] = next;
        }
        residuals.push(residual);
        if residual <= cfg.fixed_point_tol {
            return Ok(NashSolution {
                y,
                sweeps: sweep,
                residuals,
                non_unique,
            });
        }
    }
    Err(Error::NonConvergence(Box::new(NonConvergenceReport {
        x: x.to_vec(),
        sweeps: cfg.max_sweeps,
        residuals,
        last_y: y,
    })))
}

/// Marginal value at one leader strategy, with the lower-level point used.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderEvaluation {
    pub x: Vec<f64>,
    pub value: f64,
    pub nash: NashSolution,
    pub multiplicity_warning: bool,
}

pub fn evaluate_leader(g: &GameSpec, x: &[f64], cfg: &SolverConfig) -> Result<LeaderEvaluation> {
    cfg.validate()?;
    check_leader_point(g, x)?;
    let intervals = feasible_intervals(g, x)?;
    let origin = vec![0.0; g.num_followers()];

    let starts: Vec<Vec<f64>> = match cfg.lower_select {
        LowerSelect::Iterate => vec![origin],
        LowerSelect::OptimisticScan => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut s = vec![
                origin,
                intervals.iter().map(|iv| iv.lo).collect(),
                intervals.iter().map(|iv| iv.hi).collect(),
                intervals.iter().map(|iv| iv.midpoint()).collect(),
            ];
            for _ in 0..cfg.scan_starts {
                s.push(
                    intervals
                        .iter()
                        .map(|iv| iv.lo + rng.random::<f64>() * iv.width())
                        .collect(),
                );
            }
            s
        }
    };

    let mut first_err = None;
    let mut converged: Vec<(f64, NashSolution)> = Vec::new();
    for start in &starts {
        match iterate(g, x, start, &intervals, cfg) {
            Ok(sol) => {
                let v = g.leader_payoff_unchecked(x, &sol.y);
                converged.push((v, sol));
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if converged.is_empty() {
        return Err(first_err.expect("at least one start"));
    }
    let mut best = 0;
    for k in 1..converged.len() {
        if converged[k].0 > converged[best].0 {
            best = k;
        }
    }
    let (value, nash) = converged.swap_remove(best);
    let distinct = converged.iter().any(|(_, other)| {
        other
            .y
            .iter()
            .zip(&nash.y)
            .any(|(a, b)| (a - b).abs() > DISTINCT_RESPONSE)
    });
    if distinct || nash.non_unique {
        log::debug!("several lower-level equilibria suspected at x = {x:?}");
    }
    Ok(LeaderEvaluation {
        x: x.to_vec(),
        value,
        multiplicity_warning: distinct || nash.non_unique,
        nash,
    })
}

/// `V(x)`: the leader's payoff at the lower-level equilibrium reached at `x`.
pub fn leader_value(g: &GameSpec, x: &[f64], cfg: &SolverConfig) -> Result<f64> {
    evaluate_leader(g, x, cfg).map(|e| e.value)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Diagnostics {
    pub sweeps: usize,
    pub final_residual: f64,
    pub active_constraints: Vec<bool>,
    pub leader_grid_evaluations: usize,
    pub leader_refine_evaluations: usize,
    pub skipped_leader_points: usize,
    pub multiplicity_warning: bool,
}

/// Candidate equilibrium `(x*, y*)` with payoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    #[serde(default)]
    pub leader_payoff: f64,
    /// Each follower's objective (the minimized quantity).
    #[serde(default)]
    pub follower_payoffs: Vec<f64>,
    /// Each follower's family formula with its declared sign.
    #[serde(default)]
    pub follower_nominal_payoffs: Vec<f64>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

fn build_point(g: &GameSpec, eval: LeaderEvaluation, diagnostics: Diagnostics) -> Result<EquilibriumPoint> {
    let x = eval.x;
    let y = eval.nash.y;
    let follower_payoffs = (0..y.len())
        .map(|i| g.follower_payoff(i, &x, &y))
        .collect::<Result<Vec<_>>>()?;
    let follower_nominal_payoffs = (0..y.len())
        .map(|i| g.follower_nominal_payoff(i, &x, &y))
        .collect::<Result<Vec<_>>>()?;
    let active_constraints = (0..y.len())
        .map(|i| {
            let soc = g.soc(i, &x)?;
            Ok(soc.residual(y[i]) >= -ACTIVE_TOL * soc.budget.abs().max(1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumPoint {
        leader_payoff: g.leader_payoff(&x, &y)?,
        follower_payoffs,
        follower_nominal_payoffs,
        diagnostics: Diagnostics {
            sweeps: eval.nash.sweeps,
            final_residual: eval.nash.residuals.last().copied().unwrap_or(0.0),
            active_constraints,
            multiplicity_warning: eval.multiplicity_warning,
            ..diagnostics
        },
        x_star: x,
        y_star: y,
    })
}

/// Lower-level equilibrium and payoffs at a fixed leader strategy.
pub fn equilibrium_at(g: &GameSpec, x: &[f64], cfg: &SolverConfig) -> Result<EquilibriumPoint> {
    let eval = evaluate_leader(g, x, cfg)?;
    build_point(g, eval, Diagnostics::default())
}

struct GridSearch<'a> {
    g: &'a GameSpec,
    cfg: &'a SolverConfig,
    grid_evaluations: usize,
    refine_evaluations: usize,
    skipped: usize,
    first_non_convergence: Option<Error>,
}

impl GridSearch<'_> {
    /// Evaluates `V` at every point in parallel; order of the output matches
    /// the input.
    fn evaluate_all(&mut self, points: Vec<Vec<f64>>) -> Vec<Option<LeaderEvaluation>> {
        self.grid_evaluations += points.len();
        let results: Vec<Result<LeaderEvaluation>> = points
            .par_iter()
            .map(|x| evaluate_leader(self.g, x, self.cfg))
            .collect();
        results.into_iter().map(|r| self.keep(r)).collect()
    }

    fn keep(&mut self, r: Result<LeaderEvaluation>) -> Option<LeaderEvaluation> {
        match r {
            Ok(e) => Some(e),
            Err(e) => {
                self.skipped += 1;
                if matches!(e, Error::NonConvergence(_)) {
                    self.first_non_convergence.get_or_insert(e);
                }
                None
            }
        }
    }

    /// Grid line through `base` along coordinate `d`; returns the first
    /// maximizer on the line.
    fn line(&mut self, base: &[f64], d: usize) -> Option<LeaderEvaluation> {
        let points = self.g.leader().bounds[d]
            .linspace(self.cfg.leader_grid)
            .into_iter()
            .map(|t| {
                let mut x = base.to_vec();
                x[d] = t;
                x
            })
            .collect();
        let mut best: Option<LeaderEvaluation> = None;
        for e in self.evaluate_all(points).into_iter().flatten() {
            if best.as_ref().is_none_or(|b| e.value > b.value) {
                best = Some(e);
            }
        }
        best
    }

    fn refine(&mut self, incumbent: LeaderEvaluation, d: usize) -> LeaderEvaluation {
        let bounds = self.g.leader().bounds[d];
        let step = bounds.width() / (self.cfg.leader_grid - 1) as f64;
        let centre = incumbent.x[d];
        let bracket = Interval::new((centre - step).max(bounds.lo), (centre + step).min(bounds.hi));
        if bracket.width() <= self.cfg.leader_refine_tol {
            return incumbent;
        }
        let (g, cfg) = (self.g, self.cfg);
        let mut evaluations = 0;
        let at = |t: f64| {
            let mut x = incumbent.x.clone();
            x[d] = t;
            x
        };
        let found = golden_section_min(
            |t| {
                evaluations += 1;
                match evaluate_leader(g, &at(t), cfg) {
                    Ok(e) => -e.value,
                    Err(e) => {
                        log::warn!("refinement probe skipped: {e}");
                        f64::INFINITY
                    }
                }
            },
            bracket,
            cfg.leader_refine_tol,
        );
        self.refine_evaluations += evaluations;
        if -found.value > incumbent.value {
            if let Ok(e) = evaluate_leader(g, &at(found.x), cfg) {
                if e.value > incumbent.value {
                    return e;
                }
            }
        }
        incumbent
    }
}

/// Leader's optimal strategy against the followers' equilibrium response.
///
/// Grid ties go to the earliest grid point (lowest coordinates); refinement
/// only replaces the incumbent on strict improvement. Grid points where the
/// followers have no feasible strategy are skipped; a grid point where the
/// lower level fails to converge fails the whole search.
pub fn leader_optimize(g: &GameSpec, cfg: &SolverConfig) -> Result<EquilibriumPoint> {
    cfg.validate()?;
    g.validate()?;
    let mut search = GridSearch {
        g,
        cfg,
        grid_evaluations: 0,
        refine_evaluations: 0,
        skipped: 0,
        first_non_convergence: None,
    };
    let m = g.dim();
    let corner: Vec<f64> = g.leader().bounds.iter().map(|b| b.lo).collect();

    let mut incumbent: Option<LeaderEvaluation> = None;
    let passes = if m == 1 { 1 } else { MAX_COORDINATE_PASSES };
    for _ in 0..passes {
        let mut moved = false;
        for d in 0..m {
            let base = incumbent.as_ref().map_or(corner.clone(), |e| e.x.clone());
            if let Some(e) = search.line(&base, d) {
                let better = incumbent.as_ref().is_none_or(|inc| e.value > inc.value);
                if better {
                    moved = true;
                    incumbent = Some(e);
                }
            }
        }
        if !moved {
            break;
        }
    }
    if let Some(e) = search.first_non_convergence.take() {
        return Err(e);
    }
    let Some(mut best) = incumbent else {
        return Err(Error::NoFeasibleLeaderPoint);
    };
    for d in 0..m {
        best = search.refine(best, d);
    }
    let diagnostics = Diagnostics {
        leader_grid_evaluations: search.grid_evaluations,
        leader_refine_evaluations: search.refine_evaluations,
        skipped_leader_points: search.skipped,
        ..Diagnostics::default()
    };
    build_point(g, best, diagnostics)
}
