//! Learned meta-solvers for population-based solving of two-player
//! zero-sum games.
//!
//! A meta-solver `f_θ` maps the payoff matrix among the current population to
//! a distribution over its members. A best-response oracle then trains a new
//! policy against that mixture, and the loop repeats. The parameters `θ` are
//! trained to minimise the exploitability of the final mixture, either by
//! differentiating through the whole loop or by evolution strategies.

pub mod error;
pub mod es;
pub mod exec;
pub mod games;
pub mod harness;
pub mod metagrad;
pub mod oracles;
pub mod population;
pub mod psro;
pub mod real;
pub mod seed;
pub mod solvers;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;
