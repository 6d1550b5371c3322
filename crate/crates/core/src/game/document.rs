//! JSON game documents.
//!
//! ```json
//! {
//!   "leader": { "box": [[0, 8]], "payoff": { "family": "bilinear", "a": 1, "c": 1.5 } },
//!   "followers": [{
//!     "box": [0, 20],
//!     "payoff": { "family": "bilinear", "e": 1, "k": 2, "orientation": "table-reproducing" },
//!     "budget": 20,
//!     "alpha": 0.05,
//!     "ambiguity": { "base_mean": 1.2, "sensitivity": [0.1], "variance": 0.01,
//!                    "gamma1": 0.01, "gamma2": 1.01 }
//!   }]
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FollowerPayoff, FollowerSpec, GameSpec, LeaderPayoff, LeaderSpec};
use crate::ambiguity::{MeanModel, MomentAmbiguity};
use crate::{Interval, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub leader: LeaderDocument,
    pub followers: Vec<FollowerDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderDocument {
    #[serde(rename = "box")]
    pub bounds: Vec<Interval>,
    pub payoff: LeaderPayoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerDocument {
    #[serde(rename = "box")]
    pub bounds: Interval,
    pub payoff: FollowerPayoff,
    pub budget: f64,
    pub alpha: f64,
    pub ambiguity: AmbiguityDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguityDocument {
    pub base_mean: f64,
    pub sensitivity: Vec<f64>,
    pub variance: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl GameDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("game documents always serialize")
    }

    /// Converts without checking game invariants.
    pub fn into_game_unchecked(self) -> GameSpec {
        let leader = LeaderSpec {
            bounds: self.leader.bounds,
            payoff: self.leader.payoff,
        };
        let followers = self
            .followers
            .into_iter()
            .map(|f| FollowerSpec {
                bounds: f.bounds,
                payoff: f.payoff,
                budget: f.budget,
                ambiguity: MomentAmbiguity::new_unchecked(
                    MeanModel::new(f.ambiguity.base_mean, f.ambiguity.sensitivity),
                    f.ambiguity.variance,
                    f.ambiguity.gamma1,
                    f.ambiguity.gamma2,
                    f.alpha,
                ),
            })
            .collect();
        GameSpec::new_unchecked(leader, followers)
    }

    pub fn into_game(self) -> Result<GameSpec> {
        let g = self.into_game_unchecked();
        g.validate()?;
        Ok(g)
    }
}

impl From<&GameSpec> for GameDocument {
    fn from(g: &GameSpec) -> Self {
        GameDocument {
            leader: LeaderDocument {
                bounds: g.leader.bounds.clone(),
                payoff: g.leader.payoff,
            },
            followers: g
                .followers
                .iter()
                .map(|f| FollowerDocument {
                    bounds: f.bounds,
                    payoff: f.payoff,
                    budget: f.budget,
                    alpha: f.ambiguity.alpha(),
                    ambiguity: AmbiguityDocument {
                        base_mean: f.ambiguity.mean_model().base_mean,
                        sensitivity: f.ambiguity.mean_model().sensitivity.clone(),
                        variance: f.ambiguity.variance(),
                        gamma1: f.ambiguity.gamma1(),
                        gamma2: f.ambiguity.gamma2(),
                    },
                })
                .collect(),
        }
    }
}

impl GameSpec {
    pub fn to_document(&self) -> GameDocument {
        GameDocument::from(self)
    }
}

/// Parses and validates a game document.
pub fn load_spec(text: &str) -> Result<GameSpec> {
    GameDocument::from_json(text)?.into_game()
}

/// Parses a game document, checking the schema but not game invariants.
pub fn parse_spec_unchecked(text: &str) -> Result<GameSpec> {
    Ok(GameDocument::from_json(text)?.into_game_unchecked())
}

pub fn load_spec_path(path: impl AsRef<Path>) -> Result<GameSpec> {
    load_spec(&std::fs::read_to_string(path)?)
}
