//! Single-leader / multi-follower Stackelberg–Nash games whose follower
//! constraints are decision-dependent chance constraints.
//!
//! The pipeline is:
//!
//! 1. [`ambiguity`] estimates reference moments from samples and describes the
//!    moment ambiguity set around a leader-dependent mean.
//! 2. [`cantelli`] turns each distributionally robust chance constraint into a
//!    second-order cone constraint, and provides the worst-case probability in
//!    closed form plus a brute-force oracle for it.
//! 3. [`game`] holds the game data (boxes, payoffs, budgets, ambiguity sets)
//!    and the JSON document format.
//! 4. [`solver`] computes equilibria: Gauss–Seidel best responses for the
//!    followers, derivative-free search over the leader's marginal value.
//! 5. [`verify`] checks structural assumptions, certifies candidate equilibria
//!    by probing, and Monte-Carlo validates constraint satisfaction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod cantelli;
mod error;
pub mod game;
pub mod interval;
pub mod search;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use interval::Interval;
