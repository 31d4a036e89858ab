//! Nash equilibria learning for finite general-sum discounted stochastic games.
//!
//! The library solves the variational inequality associated with the pseudo
//! gradient mapping `F(θ) = (−∇_{θ_i} J_i)_i` of a tabular stochastic game
//! with a two-loop method: the outer loop updates a proximal center, turning
//! `F` into a strongly monotone field, and the inner loop runs a single-call
//! extra-gradient scheme on that field. The field can be evaluated exactly by
//! dynamic programming ([`eval`]) or estimated from Monte-Carlo rollouts with
//! the G(PO)MDP estimator ([`estimator`]). Convergence is measured through
//! per-iterate Nash gaps and their weighted averages ([`metrics`]).
//!
//! The main entry points are [`solver::run_algorithm1`] (exact gradients) and
//! [`solver::run_algorithm2`] (estimated gradients).

pub mod config;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod game;
pub mod metrics;
pub mod policy;
pub mod report;
pub mod seeds;
pub mod solver;

pub use error::{Error, Result};
pub use game::TabularGame;
pub use policy::{ParamKind, ParamSpace, PolicyParams};
pub use report::ValidationReport;
