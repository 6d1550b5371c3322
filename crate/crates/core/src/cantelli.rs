//! Worst-case satisfaction probability of `ξ(x)·y ≤ b` over the moment
//! ambiguity set, and the second-order cone constraint it reduces to.
//!
//! Writing `c = b - μ(x)·y` (slack) and `s = Σ·y²` (spread), the random part
//! `β = (ξ - μ(x))·y` has mean `m` and standard deviation `σ` ranging over
//!
//! ```text
//! S = { (m, σ) : |m| ≤ sqrt(γ1·s),  m² + σ² ≤ γ2·s }
//! ```
//!
//! For fixed `(m, σ)` the one-sided Chebyshev (Cantelli) bound gives the
//! least probability `(c-m)² / (σ² + (c-m)²)` when `c ≥ m`, and 0 otherwise.
//! Minimizing over `S` yields a closed form in `r = c / sqrt(s)`; the
//! constraint `worst-case probability ≥ 1 - α` is then equivalent to
//! `μ(x)·y + l·sqrt(Σ·y²) ≤ b` with the safety factor `l` from
//! [`safety_factor`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::MomentAmbiguity;
use crate::{Error, Interval, Result};

/// Multiplier of the cone term.
///
/// `sqrt(γ1) + sqrt((1-α)/α · (γ2-γ1))` when `γ1/γ2 ≤ α`, otherwise
/// `sqrt(γ2/α)`. The two branches coincide at `γ1/γ2 = α`.
pub fn safety_factor(gamma1: f64, gamma2: f64, alpha: f64) -> Result<f64> {
    if !(gamma1 > 0.0 && gamma1.is_finite()) {
        return Err(Error::invalid("gamma1", format!("must be > 0, got {gamma1}")));
    }
    if !(gamma2 > gamma1 && gamma2.is_finite()) {
        return Err(Error::invalid(
            "gamma2",
            format!("must exceed gamma1 = {gamma1}, got {gamma2}"),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if gamma1 / gamma2 <= alpha {
        Ok(safety_factor_mean_branch(gamma1, gamma2, alpha))
    } else {
        Ok(safety_factor_variance_branch(gamma2, alpha))
    }
}

/// The `γ1/γ2 ≤ α` branch, without the branch test.
pub fn safety_factor_mean_branch(gamma1: f64, gamma2: f64, alpha: f64) -> f64 {
    gamma1.sqrt() + ((1.0 - alpha) / alpha * (gamma2 - gamma1)).sqrt()
}

/// The `γ1/γ2 > α` branch, without the branch test.
pub fn safety_factor_variance_branch(gamma2: f64, alpha: f64) -> f64 {
    (gamma2 / alpha).sqrt()
}

/// Inputs of the worst-case probability problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseQuery {
    /// `b - μ(x)·y`
    pub slack: f64,
    /// `Σ·y²`
    pub spread: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl WorstCaseQuery {
    pub fn new(slack: f64, spread: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let q = WorstCaseQuery {
            slack,
            spread,
            gamma1,
            gamma2,
        };
        q.validate()?;
        Ok(q)
    }

    /// Query for the constraint of `amb` at leader strategy `x`, follower
    /// strategy `y` and budget `b`.
    pub fn for_constraint(amb: &MomentAmbiguity, x: &[f64], y: f64, budget: f64) -> Result<Self> {
        let mean = amb.mean_at(x)?;
        WorstCaseQuery::new(
            budget - mean * y,
            amb.variance() * y * y,
            amb.gamma1(),
            amb.gamma2(),
        )
    }

    fn validate(&self) -> Result<()> {
        if !self.slack.is_finite() {
            return Err(Error::invalid("slack", format!("must be finite, got {}", self.slack)));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::invalid(
                "spread",
                format!("must be finite and >= 0, got {}", self.spread),
            ));
        }
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            return Err(Error::invalid("gamma1", format!("must be > 0, got {}", self.gamma1)));
        }
        if !(self.gamma2 > self.gamma1 && self.gamma2.is_finite()) {
            return Err(Error::invalid(
                "gamma2",
                format!("must exceed gamma1 = {}, got {}", self.gamma1, self.gamma2),
            ));
        }
        Ok(())
    }

    /// `c / sqrt(s)`; infinite for zero spread.
    pub fn ratio(&self) -> f64 {
        if self.spread == 0.0 {
            if self.slack >= 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else {
            self.slack / self.spread.sqrt()
        }
    }
}

/// Worst-case probability, or the marker for `r < sqrt(γ1)` where some
/// admissible mean already reaches the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProbabilityBound {
    Value { value: f64 },
    Infeasible,
}

impl ProbabilityBound {
    /// Collapses `Infeasible` to probability 0.
    pub fn as_probability(&self) -> f64 {
        match *self {
            ProbabilityBound::Value { value } => value,
            ProbabilityBound::Infeasible => 0.0,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            ProbabilityBound::Value { value } => Some(value),
            ProbabilityBound::Infeasible => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, ProbabilityBound::Infeasible)
    }
}

/// Closed-form infimum of `P[ξ·y ≤ b]` over the ambiguity set.
pub fn worst_case_probability(q: &WorstCaseQuery) -> Result<ProbabilityBound> {
    q.validate()?;
    if q.spread == 0.0 {
        return Ok(if q.slack >= 0.0 {
            ProbabilityBound::Value { value: 1.0 }
        } else {
            ProbabilityBound::Infeasible
        });
    }
    let r = q.ratio();
    let sqrt_g1 = q.gamma1.sqrt();
    if r < sqrt_g1 {
        return Ok(ProbabilityBound::Infeasible);
    }
    let value = if r <= q.gamma2 / sqrt_g1 {
        // worst mean sits on the |m| = sqrt(γ1 s) edge of S
        let t = r - sqrt_g1;
        t * t / (t * t + (q.gamma2 - q.gamma1))
    } else {
        // worst mean γ2/r is interior to the mean range
        (r * r - q.gamma2) / (r * r)
    };
    Ok(ProbabilityBound::Value { value })
}

/// Brute-force infimum of the Cantelli bound over a discretization of `S`.
///
/// Means are taken on `grid_n` evenly spaced values spanning
/// `[-sqrt(γ1 s), sqrt(γ1 s)]`; for each mean, `grid_n` standard deviations
/// spanning `[0, sqrt(γ2 s)]` are tried (points outside `S` are discarded)
/// together with the largest admissible deviation on the boundary of `S`.
/// Every probe lies in `S`, so the result never undercuts the true infimum.
pub fn worst_case_probability_grid(q: &WorstCaseQuery, grid_n: usize) -> Result<ProbabilityBound> {
    q.validate()?;
    if grid_n < 2 {
        return Err(Error::invalid("grid_n", format!("must be >= 2, got {grid_n}")));
    }
    let c = q.slack;
    let mean_max = (q.gamma1 * q.spread).sqrt();
    let second_max = q.gamma2 * q.spread;
    let sigma_max = second_max.sqrt();
    let means = Interval::new(-mean_max, mean_max).linspace(grid_n);
    let sigmas = Interval::new(0.0, sigma_max).linspace(grid_n);

    // None marks a probe with c < m, where the inner bound is 0
    let column_min = |m: f64| -> Option<f64> {
        if c < m {
            return None;
        }
        let t = c - m;
        let bound = |sigma: f64| -> f64 {
            if t == 0.0 && sigma == 0.0 {
                // deterministic β = c satisfies β ≤ c
                1.0
            } else {
                t * t / (sigma * sigma + t * t)
            }
        };
        let room = second_max - m * m;
        let arc = bound(room.max(0.0).sqrt());
        let inner = sigmas
            .iter()
            .filter(|&&s| m * m + s * s <= second_max)
            .map(|&s| bound(s))
            .fold(f64::INFINITY, f64::min);
        Some(arc.min(inner))
    };

    let columns: Vec<Option<f64>> = means.par_iter().map(|&m| column_min(m)).collect();
    if columns.iter().any(Option::is_none) {
        return Ok(ProbabilityBound::Infeasible);
    }
    let value = columns.into_iter().flatten().fold(f64::INFINITY, f64::min);
    Ok(ProbabilityBound::Value { value })
}

/// Two-point law attaining equality in Cantelli's inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointWitness {
    pub low_point: f64,
    pub high_point: f64,
    /// Probability of `high_point`.
    pub high_prob: f64,
}

impl TwoPointWitness {
    /// Raw constructor from atoms; requires `low_point < high_point` and
    /// `high_prob ∈ (0, 1)`.
    pub fn from_atoms(low_point: f64, high_point: f64, high_prob: f64) -> Result<Self> {
        if !(low_point < high_point) || !low_point.is_finite() || !high_point.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "atoms must be finite with low < high, got {low_point} and {high_point}"
            )));
        }
        if !(high_prob > 0.0 && high_prob < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "atom probability must lie in (0, 1), got {high_prob}"
            )));
        }
        Ok(TwoPointWitness {
            low_point,
            high_point,
            high_prob,
        })
    }

    pub fn low_prob(&self) -> f64 {
        1.0 - self.high_prob
    }

    pub fn mean(&self) -> f64 {
        self.low_prob() * self.low_point + self.high_prob * self.high_point
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.low_prob() * (self.low_point - m).powi(2) + self.high_prob * (self.high_point - m).powi(2)
    }

    /// `P[X ≥ threshold]`, exact.
    pub fn upper_tail(&self, threshold: f64) -> f64 {
        let mut p = 0.0;
        if self.low_point >= threshold {
            p += self.low_prob();
        }
        if self.high_point >= threshold {
            p += self.high_prob;
        }
        p
    }
}

/// Distribution with mean `mu1`, variance `sigma1²` and
/// `P[X ≥ mu1 + lambda] = sigma1² / (sigma1² + lambda²)`.
pub fn tightness_witness(mu1: f64, sigma1: f64, lambda: f64) -> Result<TwoPointWitness> {
    if !(sigma1 > 0.0 && sigma1.is_finite()) {
        return Err(Error::invalid("sigma1", format!("must be > 0, got {sigma1}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")));
    }
    if !mu1.is_finite() {
        return Err(Error::invalid("mu1", format!("must be finite, got {mu1}")));
    }
    let var = sigma1 * sigma1;
    let lam2 = lambda * lambda;
    Ok(TwoPointWitness {
        low_point: mu1 - var / lambda,
        high_point: mu1 + lambda,
        high_prob: var / (var + lam2),
    })
}

/// Law of `β = (ξ - μ(x))·y` that drives `P[β ≤ c]` down to the worst-case
/// bound. The upper atom is placed `margin·λ` beyond `c` so that it counts
/// as a violation; its moments stay on the worst-case point of `S`.
pub fn adversarial_witness(q: &WorstCaseQuery, margin: f64) -> Result<TwoPointWitness> {
    q.validate()?;
    if q.spread == 0.0 {
        return Err(Error::InvalidDistribution(
            "zero spread: the constraint is deterministic".into(),
        ));
    }
    let root = q.spread.sqrt();
    let r = q.ratio();
    let sqrt_g1 = q.gamma1.sqrt();
    if r <= sqrt_g1 {
        return Err(Error::InvalidDistribution(format!(
            "ratio {r} <= sqrt(gamma1): an admissible mean already violates the constraint"
        )));
    }
    let mean_scaled = if r <= q.gamma2 / sqrt_g1 {
        sqrt_g1
    } else {
        q.gamma2 / r
    };
    let mu1 = mean_scaled * root;
    let sigma1 = ((q.gamma2 - mean_scaled * mean_scaled).max(0.0)).sqrt() * root;
    let lambda = (q.slack - mu1) * (1.0 + margin);
    tightness_witness(mu1, sigma1, lambda)
}

/// The cone constraint `μ(x)·y + l·sqrt(Σ·y²) ≤ b` at a fixed leader strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocConstraint {
    pub mean_at_x: f64,
    pub safety_factor: f64,
    pub sigma: f64,
    pub budget: f64,
}

impl SocConstraint {
    /// `l·sqrt(Σ)`, the slope of the cone term in `|y|`.
    pub fn cone_slope(&self) -> f64 {
        self.safety_factor * self.sigma.sqrt()
    }

    pub fn lhs(&self, y: f64) -> f64 {
        self.mean_at_x * y + self.safety_factor * (self.sigma * y * y).sqrt()
    }

    /// `lhs(y) - b`; nonpositive iff satisfied.
    pub fn residual(&self, y: f64) -> f64 {
        self.lhs(y) - self.budget
    }

    pub fn is_satisfied(&self, y: f64, tol: f64) -> bool {
        self.residual(y) <= tol
    }
}

pub fn reformulate(amb: &MomentAmbiguity, x: &[f64], budget: f64) -> Result<SocConstraint> {
    Ok(SocConstraint {
        mean_at_x: amb.mean_at(x)?,
        safety_factor: safety_factor(amb.gamma1(), amb.gamma2(), amb.alpha())?,
        sigma: amb.variance(),
        budget,
    })
}

/// Exact `{ y ∈ bounds : μ·y + l·sqrt(Σ)·|y| ≤ b }`.
///
/// The left side is convex and piecewise linear with a kink at 0, so each
/// half-line contributes an interval and their union is an interval.
pub fn feasible_interval(soc: &SocConstraint, bounds: Interval) -> Option<Interval> {
    if bounds.is_empty() {
        return None;
    }
    let k = soc.cone_slope();
    let b = soc.budget;
    let positive = Interval::new(bounds.lo.max(0.0), bounds.hi)
        .intersect(&bounds)
        .and_then(|seg| half_line_solution(soc.mean_at_x + k, b, seg));
    let negative = Interval::new(bounds.lo, bounds.hi.min(0.0))
        .intersect(&bounds)
        .and_then(|seg| half_line_solution(soc.mean_at_x - k, b, seg));
    match (negative, positive) {
        (Some(n), Some(p)) => Some(Interval::new(n.lo.min(p.lo), n.hi.max(p.hi))),
        (one, None) | (None, one) => one,
    }
}

/// `{ y ∈ seg : slope·y ≤ b }`
fn half_line_solution(slope: f64, b: f64, seg: Interval) -> Option<Interval> {
    if slope > 0.0 {
        seg.intersect(&Interval::new(f64::NEG_INFINITY, b / slope))
    } else if slope < 0.0 {
        seg.intersect(&Interval::new(b / slope, f64::INFINITY))
    } else if b >= 0.0 {
        Some(seg)
    } else {
        None
    }
}
