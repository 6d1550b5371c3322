//! Checks on inputs and outputs: standing assumptions of a game, equilibrium
//! certificates, and Monte Carlo estimates of chance-constraint satisfaction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ambiguity::MomentAmbiguity;
use crate::cantelli::{adversarial_witness, TwoPointWitness, WorstCaseQuery};
use crate::game::GameSpec;
use crate::solver::{evaluate_leader, SolverConfig};
use crate::{Error, Interval, Result};

/// Secant-test slack before a probe counts as a convexity violation.
const CONVEXITY_TOL: f64 = 1e-9;

/// Probes of a follower's feasible interval must contain `y*` up to this.
const FEASIBILITY_TOL: f64 = 1e-8;

/// Relative slack when checking that a sampling law lies in the ambiguity set.
const MOMENT_REL_TOL: f64 = 1e-9;

/// Upper atom displacement past the budget in the adversarial law.
const WITNESS_MARGIN: f64 = 1e-9;

/// Largest tensor grid the leader check enumerates for `m > 1`.
const MAX_TENSOR_PROBES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub check: String,
    pub subject: String,
    pub passed: bool,
    /// Counterexample when the check fails.
    pub evidence: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub own_a: f64,
    pub own_b: f64,
    pub lambda: f64,
    /// `φ(λa + (1-λ)b) - (λφ(a) + (1-λ)φ(b))`; positive means non-convex.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCheck {
    pub follower: usize,
    pub probes: usize,
    pub violations: usize,
    pub witness: Option<ConvexityWitness>,
    /// Boxes were not sample-able; the structural checks already failed.
    pub skipped: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub convexity: Vec<ConvexityCheck>,
    pub passed: bool,
}

impl AssumptionReport {
    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn structural_checks(g: &GameSpec) -> Vec<AssumptionCheck> {
    let violations: Vec<(String, String)> = g
        .violations()
        .into_iter()
        .filter_map(|e| match e {
            Error::InvalidParameter { field, reason } => Some((field, reason)),
            _ => None,
        })
        .collect();
    let check = |name: &str, subject: String, matches: &dyn Fn(&str) -> bool| {
        let hits: Vec<String> = violations
            .iter()
            .filter(|(f, _)| matches(f))
            .map(|(f, r)| format!("{f}: {r}"))
            .collect();
        AssumptionCheck {
            check: name.to_string(),
            subject,
            passed: hits.is_empty(),
            evidence: (!hits.is_empty()).then(|| hits.join("; ")),
        }
    };

    let mut out = vec![
        check("compact leader strategy set", "leader.box".into(), &|f| {
            f.starts_with("leader.box")
        }),
        check("finite payoff parameters", "leader.payoff".into(), &|f| {
            f.starts_with("leader.payoff")
        }),
        check("at least one follower", "followers".into(), &|f| f == "followers"),
    ];
    for i in 0..g.num_followers() {
        let p = format!("followers[{i}]");
        let field = |s: &str| format!("{p}.{s}");
        out.push(check(
            "compact strategy set containing the origin",
            field("box"),
            &|f| f == field("box"),
        ));
        out.push(check("positive constant budget", field("budget"), &|f| {
            f == field("budget")
        }));
        out.push(check("finite payoff parameters", field("payoff"), &|f| {
            f.starts_with(&field("payoff"))
        }));
        out.push(check(
            "moment parameters in domain",
            field("ambiguity"),
            &|f| {
                f == field("alpha")
                    || (f.starts_with(&field("ambiguity"))
                        && f != field("ambiguity.sensitivity"))
            },
        ));
        out.push(check(
            "sensitivity matches leader dimension",
            field("ambiguity.sensitivity"),
            &|f| f == field("ambiguity.sensitivity"),
        ));
    }
    out
}

fn sampleable(iv: &Interval) -> bool {
    !iv.is_empty() && iv.is_bounded()
}

fn uniform(rng: &mut ChaCha8Rng, iv: &Interval) -> f64 {
    iv.lo + rng.random::<f64>() * iv.width()
}

fn convexity_check(g: &GameSpec, i: usize, probes: usize, rng: &mut ChaCha8Rng) -> ConvexityCheck {
    let boxes_ok = g.leader().bounds.iter().all(sampleable)
        && g.followers().iter().all(|f| sampleable(&f.bounds));
    if !boxes_ok || g.leader().bounds.is_empty() {
        return ConvexityCheck {
            follower: i,
            probes: 0,
            violations: 0,
            witness: None,
            skipped: true,
            passed: true,
        };
    }
    let own = g.followers()[i].bounds;
    let mut violations = 0;
    let mut witness: Option<ConvexityWitness> = None;
    for _ in 0..probes {
        let x: Vec<f64> = g.leader().bounds.iter().map(|b| uniform(rng, b)).collect();
        let y: Vec<f64> = g.followers().iter().map(|f| uniform(rng, &f.bounds)).collect();
        let a = uniform(rng, &own);
        let b = uniform(rng, &own);
        let lambda = rng.random::<f64>();
        let phi = |v: f64| g.follower_objective_at(i, &x, &y, v);
        let mid = phi(lambda * a + (1.0 - lambda) * b);
        let chord = lambda * phi(a) + (1.0 - lambda) * phi(b);
        let gap = mid - chord;
        let scale = 1.0 + mid.abs().max(chord.abs());
        if gap > CONVEXITY_TOL * scale {
            violations += 1;
            if witness.as_ref().is_none_or(|w| gap > w.gap) {
                witness = Some(ConvexityWitness {
                    x,
                    y,
                    own_a: a,
                    own_b: b,
                    lambda,
                    gap,
                });
            }
        }
    }
    ConvexityCheck {
        follower: i,
        probes,
        violations,
        passed: violations == 0,
        witness,
        skipped: false,
    }
}

/// Runs the structural checks and a sampled secant test of each follower's
/// convexity in its own strategy. Never fails: problems are reported.
pub fn check_assumptions(g: &GameSpec, probes: usize, seed: u64) -> AssumptionReport {
    let checks = structural_checks(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let convexity: Vec<ConvexityCheck> = (0..g.num_followers())
        .map(|i| convexity_check(g, i, probes.max(1), &mut rng))
        .collect();
    let passed = checks.iter().all(|c| c.passed) && convexity.iter().all(|c| c.passed);
    AssumptionReport {
        checks,
        convexity,
        passed,
    }
}

/// How the leader's deviations are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderCheck {
    /// `f(x, y*) - f(x*, y*)` with the followers held at `y*`.
    Literal,
    /// `V(x) - f(x*, y*)` with the followers re-solved at every probe.
    Bilevel(SolverConfig),
}

impl LeaderCheck {
    fn name(&self) -> &'static str {
        match self {
            LeaderCheck::Literal => "literal",
            LeaderCheck::Bilevel(_) => "bilevel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCertificate {
    pub mode: String,
    pub grid_n: usize,
    pub tolerance: f64,
    /// Largest leader gain over the probes.
    pub leader_check: f64,
    pub leader_witness: Option<Vec<f64>>,
    pub leader_probes: usize,
    /// Per follower, the largest decrease of its objective over the probes.
    pub follower_checks: Vec<f64>,
    pub follower_witnesses: Vec<Option<f64>>,
    pub passed: bool,
}

fn leader_probes(g: &GameSpec, x_star: &[f64], grid_n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = g.leader().bounds.iter().map(|b| b.linspace(grid_n)).collect();
    let total = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|&n| n <= MAX_TENSOR_PROBES);
    match total {
        Some(_) => {
            let mut points = vec![Vec::new()];
            for axis in &axes {
                points = points
                    .into_iter()
                    .flat_map(|p| {
                        axis.iter().map(move |&t| {
                            let mut q = p.clone();
                            q.push(t);
                            q
                        })
                    })
                    .collect();
            }
            points
        }
        // coordinate lines through x*
        None => axes
            .iter()
            .enumerate()
            .flat_map(|(d, axis)| {
                axis.iter().map(move |&t| {
                    let mut q = x_star.to_vec();
                    q[d] = t;
                    q
                })
            })
            .collect(),
    }
}

/// Grid certificate that `(x*, y*)` is an equilibrium up to `eps`.
///
/// Errors with [`Error::InfeasiblePoint`] when `x*` is outside the leader box
/// or some `y*_i` violates its box or cone constraint.
pub fn verify_equilibrium(
    g: &GameSpec,
    x_star: &[f64],
    y_star: &[f64],
    grid_n: usize,
    eps: f64,
    mode: &LeaderCheck,
) -> Result<EquilibriumCertificate> {
    if grid_n < 2 {
        return Err(Error::invalid("grid_n", format!("must be >= 2, got {grid_n}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid("eps", format!("must be >= 0, got {eps}")));
    }
    if x_star.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: x_star.len(),
        });
    }
    if y_star.len() != g.num_followers() {
        return Err(Error::DimensionMismatch {
            expected: g.num_followers(),
            got: y_star.len(),
        });
    }
    for (j, (v, b)) in x_star.iter().zip(&g.leader().bounds).enumerate() {
        if !b.contains_within(*v, 1e-9) {
            return Err(Error::InfeasiblePoint(format!(
                "x*[{j}] = {v} lies outside [{}, {}]",
                b.lo, b.hi
            )));
        }
    }
    let mut intervals = Vec::with_capacity(y_star.len());
    for (i, &yi) in y_star.iter().enumerate() {
        let f = &g.followers()[i];
        if !f.bounds.contains_within(yi, FEASIBILITY_TOL) {
            return Err(Error::InfeasiblePoint(format!(
                "y*[{i}] = {yi} lies outside [{}, {}]",
                f.bounds.lo, f.bounds.hi
            )));
        }
        let soc = g.soc(i, x_star)?;
        let slack = FEASIBILITY_TOL * soc.budget.abs().max(1.0);
        if soc.residual(yi) > slack {
            return Err(Error::InfeasiblePoint(format!(
                "y*[{i}] = {yi} violates the cone constraint by {}",
                soc.residual(yi)
            )));
        }
        match g.feasible_interval(i, x_star)? {
            Some(iv) => intervals.push(iv),
            None => {
                return Err(Error::EmptyFeasibleSet {
                    follower: i,
                    x: x_star.to_vec(),
                })
            }
        }
    }

    let base = g.leader_payoff_unchecked(x_star, y_star);
    let probes = leader_probes(g, x_star, grid_n);
    let gains: Vec<Option<f64>> = match mode {
        LeaderCheck::Literal => probes
            .iter()
            .map(|x| Some(g.leader_payoff_unchecked(x, y_star) - base))
            .collect(),
        LeaderCheck::Bilevel(cfg) => {
            use rayon::prelude::*;
            probes
                .par_iter()
                .map(|x| evaluate_leader(g, x, cfg).ok().map(|e| e.value - base))
                .collect()
        }
    };
    let mut leader_check = f64::NEG_INFINITY;
    let mut leader_witness = None;
    for (x, gain) in probes.iter().zip(&gains) {
        if let Some(v) = *gain {
            if v > leader_check {
                leader_check = v;
                leader_witness = Some(x.clone());
            }
        }
    }

    let mut follower_checks = Vec::with_capacity(y_star.len());
    let mut follower_witnesses = Vec::with_capacity(y_star.len());
    for (i, iv) in intervals.iter().enumerate() {
        let current = g.follower_objective_at(i, x_star, y_star, y_star[i]);
        let mut best = f64::NEG_INFINITY;
        let mut arg = None;
        for t in iv.linspace(grid_n) {
            let gain = current - g.follower_objective_at(i, x_star, y_star, t);
            if gain > best {
                best = gain;
                arg = Some(t);
            }
        }
        follower_checks.push(best);
        follower_witnesses.push(arg);
    }

    let passed = leader_check <= eps && follower_checks.iter().all(|&c| c <= eps);
    Ok(EquilibriumCertificate {
        mode: mode.name().to_string(),
        grid_n,
        tolerance: eps,
        leader_check,
        leader_witness,
        leader_probes: probes.len(),
        follower_checks,
        follower_witnesses,
        passed,
    })
}

/// Sampling law for the random coefficient `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChanceDistribution {
    TwoPoint(TwoPointWitness),
    /// Uniform resampling of the given values.
    Empirical { samples: Vec<f64> },
}

impl ChanceDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            ChanceDistribution::TwoPoint(w) => {
                TwoPointWitness::from_atoms(w.low_point, w.high_point, w.high_prob).map(|_| ())
            }
            ChanceDistribution::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(Error::InvalidDistribution("no samples".into()));
                }
                if samples.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDistribution("non-finite sample".into()));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ChanceDistribution::TwoPoint(w) => w.mean(),
            ChanceDistribution::Empirical { samples } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
        }
    }

    /// `E[(ξ - c)²]`.
    pub fn second_moment_about(&self, c: f64) -> f64 {
        match self {
            ChanceDistribution::TwoPoint(w) => {
                w.low_prob() * (w.low_point - c).powi(2) + w.high_prob * (w.high_point - c).powi(2)
            }
            ChanceDistribution::Empirical { samples } => {
                samples.iter().map(|v| (v - c).powi(2)).sum::<f64>() / samples.len() as f64
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ChanceDistribution::TwoPoint(w) => {
                if rng.random::<f64>() < w.high_prob {
                    w.high_point
                } else {
                    w.low_point
                }
            }
            ChanceDistribution::Empirical { samples } => {
                samples[rng.random_range(0..samples.len())]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOutcome {
    /// Fraction of draws with `ξ·y ≤ b`.
    pub probability: f64,
    pub satisfied: u64,
    pub draws: u64,
    pub standard_error: f64,
    /// The sampling law's moments lie in the ambiguity set at `x`.
    pub moments_inside: bool,
    pub warning: Option<String>,
}

/// Estimates `P[ξ·y ≤ b]` under `dist` from `n` seeded draws.
///
/// A law outside the ambiguity set is still sampled; the outcome carries a
/// warning.
pub fn monte_carlo_chance(
    amb: &MomentAmbiguity,
    x: &[f64],
    y: f64,
    budget: f64,
    dist: &ChanceDistribution,
    n: u64,
    seed: u64,
) -> Result<MonteCarloOutcome> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one draw"));
    }
    dist.validate()?;
    let center = amb.mean_at(x)?;
    let moments_inside = amb.admits(
        x,
        dist.mean(),
        dist.second_moment_about(center),
        MOMENT_REL_TOL,
    )?;
    let warning = (!moments_inside).then(|| {
        let msg = format!(
            "sampling law (mean {}, second moment about the nominal mean {}) lies outside the ambiguity set",
            dist.mean(),
            dist.second_moment_about(center)
        );
        log::warn!("{msg}");
        msg
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut satisfied = 0u64;
    for _ in 0..n {
        if dist.draw(&mut rng) * y <= budget {
            satisfied += 1;
        }
    }
    let p = satisfied as f64 / n as f64;
    Ok(MonteCarloOutcome {
        probability: p,
        satisfied,
        draws: n,
        standard_error: (p * (1.0 - p) / n as f64).sqrt(),
        moments_inside,
        warning,
    })
}

/// Two-point law for `ξ` in the ambiguity set at `x` that attains the
/// worst-case satisfaction probability of `ξ·y ≤ b`.
pub fn adversarial_distribution(
    amb: &MomentAmbiguity,
    x: &[f64],
    y: f64,
    budget: f64,
) -> Result<ChanceDistribution> {
    if y == 0.0 || !y.is_finite() {
        return Err(Error::InvalidDistribution(format!(
            "y = {y}: the constraint does not depend on the random coefficient"
        )));
    }
    let q = WorstCaseQuery::for_constraint(amb, x, y, budget)?;
    let w = adversarial_witness(&q, WITNESS_MARGIN)?;
    let center = amb.mean_at(x)?;
    // β = (ξ - μ(x))·y, so a negative y swaps the atoms
    let law = if y > 0.0 {
        TwoPointWitness::from_atoms(center + w.low_point / y, center + w.high_point / y, w.high_prob)?
    } else {
        TwoPointWitness::from_atoms(
            center + w.high_point / y,
            center + w.low_point / y,
            w.low_prob(),
        )?
    };
    Ok(ChanceDistribution::TwoPoint(law))
}
