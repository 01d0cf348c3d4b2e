//! Smoothing-averse stochastic control.
//!
//! A partially observed system is steered so that the joint entropy of a
//! fixed-interval Bayesian smoother's estimate of the whole state trajectory
//! is as large as possible. The smoother entropy is rewritten as a sum of
//! stage rewards that depend only on filter beliefs, which turns the problem
//! into ordinary belief-state dynamic programming.
//!
//! Module map:
//!
//! - [`belief`]: finite-state controlled HMMs, the Bayesian filter, entropies.
//! - [`smoother`]: stage rewards, the additive objective, forward-backward
//!   smoothing and brute-force enumeration oracles.
//! - [`quadrature`]: measurement cells used to take expectations over `Y`.
//! - [`dp`]: simplex grids and backward induction on the approximating chain.
//! - [`cloud`]: the three-state cloud-control privacy scenario.
//! - [`robot`]: covert navigation with an EKF and receding-horizon rollouts.
//! - [`cli`]: the command implementations behind the `smoothing-averse` binary.

pub mod belief;
pub mod cli;
pub mod cloud;
pub mod dp;
pub mod error;
pub mod quadrature;
pub mod robot;
pub mod seed;
pub mod smoother;
pub mod verify;

pub use belief::{Belief, ControlledHmm, EmissionModel, JointTable, Observation};
pub use error::{Error, Result};
