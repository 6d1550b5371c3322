//! Game data: the leader's box and payoff, and per follower a box, payoff,
//! budget and ambiguity set.
//!
//! Payoffs come from a closed set of parametric families. The bilinear
//! family is
//!
//! ```text
//! f(x, y)   = a · Σⱼ xⱼ · Σᵢ yᵢ + c                       (leader, maximized)
//! φᵢ(x, y)  = ± eᵢ · Σⱼ xⱼ · yᵢ − kᵢ · Σ_{l≠i} y_l          (follower i, minimized)
//! ```
//!
//! where the sign of the own-strategy term is selected by [`Orientation`].

mod document;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ambiguity::{MeanModel, MomentAmbiguity};
use crate::cantelli::{self, SocConstraint};
use crate::{Error, Interval, Result};

pub use document::{load_spec, load_spec_path, parse_spec_unchecked, GameDocument};

/// Box-membership slack used when evaluating payoffs.
const BOX_TOL: f64 = 1e-9;

/// Sign convention of the follower's own-strategy term in the bilinear
/// family.
///
/// `PaperLiteral` minimizes `e·x·y_i − k·Σ y_{-i}` as printed, which sends
/// every follower to `y_i = 0` when `e·x > 0`. `TableReproducing` minimizes
/// `−e·x·y_i − k·Σ y_{-i}`, pushing followers onto their cone constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    PaperLiteral,
    #[default]
    TableReproducing,
}

impl Orientation {
    fn own_sign(self) -> f64 {
        match self {
            Orientation::PaperLiteral => 1.0,
            Orientation::TableReproducing => -1.0,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::PaperLiteral => "paper-literal",
            Orientation::TableReproducing => "table-reproducing",
        })
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" => Ok(Orientation::PaperLiteral),
            "table-reproducing" => Ok(Orientation::TableReproducing),
            other => Err(Error::invalid(
                "orientation",
                format!("expected `paper-literal` or `table-reproducing`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum LeaderPayoff {
    Bilinear { a: f64, c: f64 },
}

impl LeaderPayoff {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            LeaderPayoff::Bilinear { a, c } => {
                a * x.iter().sum::<f64>() * y.iter().sum::<f64>() + c
            }
        }
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            LeaderPayoff::Bilinear { a, c } => vec![("a", a), ("c", c)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum FollowerPayoff {
    Bilinear {
        e: f64,
        k: f64,
        #[serde(default)]
        orientation: Orientation,
    },
    /// `curvature·(y_i − target)² + e·Σx·y_i − k·Σ y_{-i}`
    Quadratic {
        curvature: f64,
        target: f64,
        #[serde(default)]
        e: f64,
        #[serde(default)]
        k: f64,
    },
}

impl FollowerPayoff {
    /// Objective the follower minimizes.
    fn objective(&self, x_sum: f64, own: f64, others: f64) -> f64 {
        match *self {
            FollowerPayoff::Bilinear { e, k, orientation } => {
                orientation.own_sign() * e * x_sum * own - k * others
            }
            FollowerPayoff::Quadratic {
                curvature,
                target,
                e,
                k,
            } => curvature * (own - target).powi(2) + e * x_sum * own - k * others,
        }
    }

    /// The family's formula with its declared sign, ignoring orientation.
    fn nominal(&self, x_sum: f64, own: f64, others: f64) -> f64 {
        match *self {
            FollowerPayoff::Bilinear { e, k, .. } => e * x_sum * own - k * others,
            FollowerPayoff::Quadratic { .. } => self.objective(x_sum, own, others),
        }
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            FollowerPayoff::Bilinear { e, k, .. } => vec![("e", e), ("k", k)],
            FollowerPayoff::Quadratic {
                curvature,
                target,
                e,
                k,
            } => vec![("curvature", curvature), ("target", target), ("e", e), ("k", k)],
        }
    }

    pub fn with_orientation(self, o: Orientation) -> Self {
        match self {
            FollowerPayoff::Bilinear { e, k, .. } => FollowerPayoff::Bilinear {
                e,
                k,
                orientation: o,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSpec {
    pub bounds: Vec<Interval>,
    pub payoff: LeaderPayoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerSpec {
    pub bounds: Interval,
    pub payoff: FollowerPayoff,
    pub budget: f64,
    pub ambiguity: MomentAmbiguity,
}

/// A complete game. Construct through [`GameSpec::new`] (validated),
/// [`load_spec`], or [`instantiate_bilinear`].
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    leader: LeaderSpec,
    followers: Vec<FollowerSpec>,
}

impl GameSpec {
    pub fn new(leader: LeaderSpec, followers: Vec<FollowerSpec>) -> Result<Self> {
        let g = GameSpec::new_unchecked(leader, followers);
        g.validate()?;
        Ok(g)
    }

    /// No invariant checks. Evaluation on such a game may fail or return
    /// meaningless values; `verify::check_assumptions` reports what is wrong.
    pub fn new_unchecked(leader: LeaderSpec, followers: Vec<FollowerSpec>) -> Self {
        GameSpec { leader, followers }
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// All invariant violations, each naming the offending field.
    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        let m = self.leader.bounds.len();
        if m == 0 {
            out.push(Error::invalid("leader.box", "leader strategy needs at least one dimension"));
        }
        for (j, b) in self.leader.bounds.iter().enumerate() {
            if b.is_empty() || !b.is_bounded() {
                out.push(Error::invalid(
                    format!("leader.box[{j}]"),
                    format!(
                        "strategy set must be nonempty and compact, got [{}, {}]",
                        b.lo, b.hi
                    ),
                ));
            }
        }
        for (name, v) in self.leader.payoff.params() {
            if !v.is_finite() {
                out.push(Error::invalid(format!("leader.payoff.{name}"), "must be finite"));
            }
        }
        if self.followers.is_empty() {
            out.push(Error::invalid("followers", "at least one follower is required"));
        }
        for (i, f) in self.followers.iter().enumerate() {
            let at = |field: &str| format!("followers[{i}].{field}");
            if f.bounds.is_empty() || !f.bounds.is_bounded() {
                out.push(Error::invalid(
                    at("box"),
                    format!(
                        "strategy set must be nonempty and compact, got [{}, {}]",
                        f.bounds.lo, f.bounds.hi
                    ),
                ));
            } else if !f.bounds.contains(0.0) {
                out.push(Error::invalid(
                    at("box"),
                    format!(
                        "strategy set must contain the origin, got [{}, {}]",
                        f.bounds.lo, f.bounds.hi
                    ),
                ));
            }
            if !(f.budget > 0.0 && f.budget.is_finite()) {
                out.push(Error::invalid(
                    at("budget"),
                    format!("budget must be a positive constant, got {}", f.budget),
                ));
            }
            for (name, v) in f.payoff.params() {
                if !v.is_finite() {
                    out.push(Error::invalid(at(&format!("payoff.{name}")), "must be finite"));
                }
            }
            for (field, reason) in f.ambiguity.domain_violations() {
                let path = if field == "alpha" {
                    at("alpha")
                } else {
                    at(&format!("ambiguity.{field}"))
                };
                out.push(Error::invalid(path, reason));
            }
            let d = f.ambiguity.mean_model().sensitivity.len();
            if d != m {
                out.push(Error::invalid(
                    at("ambiguity.sensitivity"),
                    format!("has {d} entries but the leader strategy has {m} dimensions"),
                ));
            }
        }
        out
    }

    pub fn leader(&self) -> &LeaderSpec {
        &self.leader
    }

    pub fn followers(&self) -> &[FollowerSpec] {
        &self.followers
    }

    pub fn follower(&self, i: usize) -> Result<&FollowerSpec> {
        self.followers
            .get(i)
            .ok_or_else(|| Error::invalid("follower", format!("index {i} out of range")))
    }

    /// Leader strategy dimension `m`.
    pub fn dim(&self) -> usize {
        self.leader.bounds.len()
    }

    pub fn num_followers(&self) -> usize {
        self.followers.len()
    }

    fn check_leader(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x
            .iter()
            .zip(&self.leader.bounds)
            .any(|(v, b)| !b.contains_within(*v, BOX_TOL))
        {
            return Err(Error::OutOfBox {
                what: "x".into(),
                value: x.to_vec(),
                bounds: self.leader.bounds.iter().map(|&b| b.into()).collect(),
            });
        }
        Ok(())
    }

    fn check_followers(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.num_followers() {
            return Err(Error::DimensionMismatch {
                expected: self.num_followers(),
                got: y.len(),
            });
        }
        if y
            .iter()
            .zip(&self.followers)
            .any(|(v, f)| !f.bounds.contains_within(*v, BOX_TOL))
        {
            return Err(Error::OutOfBox {
                what: "y".into(),
                value: y.to_vec(),
                bounds: self.followers.iter().map(|f| f.bounds.into()).collect(),
            });
        }
        Ok(())
    }

    /// `f(x, y)`; both arguments must lie in their boxes.
    pub fn leader_payoff(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_leader(x)?;
        self.check_followers(y)?;
        Ok(self.leader_payoff_unchecked(x, y))
    }

    /// Follower `i`'s objective (the quantity it minimizes) at `(x, y)`.
    /// `y` is the full profile; `y[i]` is the follower's own strategy.
    pub fn follower_payoff(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        self.follower(i)?;
        self.check_leader(x)?;
        self.check_followers(y)?;
        Ok(self.follower_objective_at(i, x, y, y[i]))
    }

    /// The follower's family formula with its declared sign. Equal to
    /// [`GameSpec::follower_payoff`] except for table-reproducing bilinear
    /// followers, where the own-strategy term keeps the printed `+` sign.
    pub fn follower_nominal_payoff(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        let f = self.follower(i)?;
        self.check_leader(x)?;
        self.check_followers(y)?;
        let x_sum = x.iter().sum::<f64>();
        Ok(f.payoff.nominal(x_sum, y[i], others_sum(y, i)))
    }

    pub(crate) fn leader_payoff_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.leader.payoff.eval(x, y)
    }

    /// Objective of follower `i` with its own entry replaced by `own`.
    pub(crate) fn follower_objective_at(&self, i: usize, x: &[f64], y: &[f64], own: f64) -> f64 {
        let x_sum = x.iter().sum::<f64>();
        self.followers[i].payoff.objective(x_sum, own, others_sum(y, i))
    }

    /// Cone constraint of follower `i` at leader strategy `x`.
    pub fn soc(&self, i: usize, x: &[f64]) -> Result<SocConstraint> {
        let f = self.follower(i)?;
        cantelli::reformulate(&f.ambiguity, x, f.budget)
    }

    /// Follower `i`'s feasible strategies at `x`: its box cut by the cone
    /// constraint.
    pub fn feasible_interval(&self, i: usize, x: &[f64]) -> Result<Option<Interval>> {
        let soc = self.soc(i, x)?;
        Ok(cantelli::feasible_interval(&soc, self.followers[i].bounds))
    }

    /// Copy with every follower's confidence factors multiplied by `rho`.
    pub fn with_risk_scale(&self, rho: f64) -> Result<GameSpec> {
        let followers = self
            .followers
            .iter()
            .map(|f| {
                Ok(FollowerSpec {
                    ambiguity: f.ambiguity.scale_risk(rho)?,
                    ..f.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GameSpec {
            leader: self.leader.clone(),
            followers,
        })
    }

    /// Copy with every bilinear follower switched to orientation `o`.
    pub fn with_orientation(&self, o: Orientation) -> GameSpec {
        let mut g = self.clone();
        for f in &mut g.followers {
            f.payoff = f.payoff.with_orientation(o);
        }
        g
    }
}

fn others_sum(y: &[f64], i: usize) -> f64 {
    y.iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, v)| v)
        .sum()
}

/// One follower of the bilinear family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearFollowerParams {
    pub e: f64,
    pub k: f64,
    /// Sensitivity `d_i` of the estimated mean to the leader strategy.
    pub d: f64,
    pub base_mean: f64,
    pub variance: f64,
    pub budget: f64,
    pub bounds: Interval,
}

/// Parameters of the scalar-leader bilinear-affine family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearFamilyParams {
    pub a: f64,
    pub c: f64,
    pub leader_bounds: Interval,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    pub orientation: Orientation,
    pub followers: Vec<BilinearFollowerParams>,
}

impl BilinearFamilyParams {
    /// The three-follower reference instance: `a = 1`, `c = 1.5`, `X = [0, 8]`,
    /// `e = 1`, `k = 2`, `b = 20`, `Y = [0, 20]`, `d = 0.1`,
    /// `μ = (1.2, 1.5, 1.6)`, `Σ = (0.01, 0.02, 0.03)`, `γ = (0.01, 1.01)`,
    /// `α = 0.05`.
    pub fn three_follower_reference() -> Self {
        let follower = |base_mean, variance| BilinearFollowerParams {
            e: 1.0,
            k: 2.0,
            d: 0.1,
            base_mean,
            variance,
            budget: 20.0,
            bounds: Interval::new(0.0, 20.0),
        };
        BilinearFamilyParams {
            a: 1.0,
            c: 1.5,
            leader_bounds: Interval::new(0.0, 8.0),
            gamma1: 0.01,
            gamma2: 1.01,
            alpha: 0.05,
            orientation: Orientation::TableReproducing,
            followers: vec![
                follower(1.2, 0.01),
                follower(1.5, 0.02),
                follower(1.6, 0.03),
            ],
        }
    }
}

pub fn instantiate_bilinear(p: &BilinearFamilyParams) -> Result<GameSpec> {
    let leader = LeaderSpec {
        bounds: vec![p.leader_bounds],
        payoff: LeaderPayoff::Bilinear { a: p.a, c: p.c },
    };
    let followers = p
        .followers
        .iter()
        .map(|f| FollowerSpec {
            bounds: f.bounds,
            payoff: FollowerPayoff::Bilinear {
                e: f.e,
                k: f.k,
                orientation: p.orientation,
            },
            budget: f.budget,
            ambiguity: MomentAmbiguity::new_unchecked(
                MeanModel::new(f.base_mean, vec![f.d]),
                f.variance,
                p.gamma1,
                p.gamma2,
                p.alpha,
            ),
        })
        .collect();
    GameSpec::new(leader, followers)
}
