//! Reference moments and the decision-dependent moment ambiguity set.
//!
//! The ambiguity set around a leader strategy `x` is
//!
//! ```text
//! D(x) = { P : (E[ξ] - μ(x))² ≤ γ1·Σ,  E[(ξ - μ(x))²] ≤ γ2·Σ }
//! ```
//!
//! where `μ(x)` is the estimated mean as a function of the leader's strategy
//! and `Σ` is the variance estimated from reference samples.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Finite reference draws of one follower's uncertain parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    follower_id: usize,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(follower_id: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySamples {
                follower: follower_id,
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                follower: follower_id,
                index,
                value,
            });
        }
        Ok(SampleSet {
            follower_id,
            values,
        })
    }

    /// Reads a CSV with a `value` column (other columns are ignored).
    pub fn from_csv_reader<R: Read>(follower_id: usize, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let column = rdr
            .headers()?
            .iter()
            .position(|h| h == "value")
            .ok_or_else(|| Error::invalid("value", "sample CSV has no `value` column"))?;
        let mut values = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let field = record.get(column).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                Error::invalid(
                    format!("value[{row}]"),
                    format!("`{field}` is not a decimal number"),
                )
            })?;
            values.push(v);
        }
        SampleSet::new(follower_id, values)
    }

    pub fn from_csv_path(follower_id: usize, path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        SampleSet::from_csv_reader(follower_id, file)
    }

    pub fn follower_id(&self) -> usize {
        self.follower_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn moments(&self) -> Moments {
        // non-empty by construction
        estimate_moments(&self.values).expect("validated sample set")
    }
}

/// Sample mean and population variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance with divisor `K`.
///
/// Values are summed in sorted order relative to the smallest sample, so the
/// result does not depend on input order and is exactly `(v, 0)` for constant
/// input.
pub fn estimate_moments(values: &[f64]) -> Result<Moments> {
    if values.is_empty() {
        return Err(Error::EmptySamples { follower: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    let anchor = sorted[0];
    let shift = sorted.iter().map(|v| v - anchor).sum::<f64>() / k;
    let variance = sorted
        .iter()
        .map(|v| {
            let d = (v - anchor) - shift;
            d * d
        })
        .sum::<f64>()
        / k;
    Ok(Moments {
        mean: anchor + shift,
        variance,
    })
}

/// Hook for mean models beyond the affine family.
pub trait MeanFunction {
    /// Dimension of the leader strategy this model accepts.
    fn dim(&self) -> usize;
    fn mean_at(&self, x: &[f64]) -> Result<f64>;
}

/// Affine estimated mean `μ(x) = base_mean + sensitivity · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    pub base_mean: f64,
    pub sensitivity: Vec<f64>,
}

impl MeanModel {
    pub fn new(base_mean: f64, sensitivity: Vec<f64>) -> Self {
        MeanModel {
            base_mean,
            sensitivity,
        }
    }

    pub fn mean_at(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.sensitivity.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sensitivity.len(),
                got: x.len(),
            });
        }
        Ok(self.base_mean + self.sensitivity.iter().zip(x).map(|(d, xi)| d * xi).sum::<f64>())
    }
}

impl MeanFunction for MeanModel {
    fn dim(&self) -> usize {
        self.sensitivity.len()
    }

    fn mean_at(&self, x: &[f64]) -> Result<f64> {
        MeanModel::mean_at(self, x)
    }
}

/// Parameters of one follower's ambiguity set, plus its risk tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAmbiguity {
    mean_model: MeanModel,
    variance: f64,
    gamma1: f64,
    gamma2: f64,
    alpha: f64,
}

impl MomentAmbiguity {
    pub fn new(
        mean_model: MeanModel,
        variance: f64,
        gamma1: f64,
        gamma2: f64,
        alpha: f64,
    ) -> Result<Self> {
        let amb = MomentAmbiguity::new_unchecked(mean_model, variance, gamma1, gamma2, alpha);
        amb.validate("ambiguity")?;
        Ok(amb)
    }

    /// Builds without checking the parameter domain; used when a report of
    /// every violation is wanted instead of the first error.
    pub fn new_unchecked(
        mean_model: MeanModel,
        variance: f64,
        gamma1: f64,
        gamma2: f64,
        alpha: f64,
    ) -> Self {
        MomentAmbiguity {
            mean_model,
            variance,
            gamma1,
            gamma2,
            alpha,
        }
    }

    /// Every parameter-domain violation as `(field, reason)`.
    pub fn domain_violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !self.mean_model.base_mean.is_finite() {
            out.push(("base_mean", format!("must be finite, got {}", self.mean_model.base_mean)));
        }
        if self.mean_model.sensitivity.iter().any(|d| !d.is_finite()) {
            out.push(("sensitivity", "entries must be finite".to_string()));
        }
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            out.push(("variance", format!("must be finite and >= 0, got {}", self.variance)));
        }
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            out.push(("gamma1", format!("mean-confidence factor must be > 0, got {}", self.gamma1)));
        }
        if !(self.gamma2 > 1.0 && self.gamma2.is_finite()) {
            out.push(("gamma2", format!("variance-confidence factor must be > 1, got {}", self.gamma2)));
        }
        if !(self.gamma2 > self.gamma1) {
            out.push(("gamma2", format!("must exceed gamma1 ({} <= {})", self.gamma2, self.gamma1)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(("alpha", format!("risk tolerance must lie in (0, 1), got {}", self.alpha)));
        }
        out
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        match self.domain_violations().into_iter().next() {
            Some((field, reason)) => Err(Error::invalid(format!("{prefix}.{field}"), reason)),
            None => Ok(()),
        }
    }

    pub fn mean_model(&self) -> &MeanModel {
        &self.mean_model
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mean_at(&self, x: &[f64]) -> Result<f64> {
        self.mean_model.mean_at(x)
    }

    /// Multiplies both confidence factors by `rho`.
    pub fn scale_risk(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", format!("must be > 0, got {rho}")));
        }
        let scaled = MomentAmbiguity {
            gamma1: self.gamma1 * rho,
            gamma2: self.gamma2 * rho,
            ..self.clone()
        };
        if !(scaled.gamma2 > 1.0) {
            return Err(Error::invalid(
                "rho",
                format!("scaled gamma2 = {} must stay > 1", scaled.gamma2),
            ));
        }
        Ok(scaled)
    }

    /// Whether a distribution with the given mean and second moment about
    /// `μ(x)` belongs to the ambiguity set at `x`. `rel_tol` widens both
    /// bounds multiplicatively.
    pub fn admits(&self, x: &[f64], mean: f64, second_moment: f64, rel_tol: f64) -> Result<bool> {
        let center = self.mean_at(x)?;
        let shift = (mean - center).powi(2);
        Ok(shift <= self.gamma1 * self.variance * (1.0 + rel_tol) + f64::EPSILON
            && second_moment <= self.gamma2 * self.variance * (1.0 + rel_tol) + f64::EPSILON)
    }
}
