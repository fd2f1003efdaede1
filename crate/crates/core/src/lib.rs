//! Finite-horizon consumption-investment optimization under Epstein-Zin
//! recursive utility in one-factor Markovian incomplete markets.
//!
//! The crate is organized around a pipeline: market model construction and
//! parameter condition checks ([`market`]), the recursive-utility aggregator
//! and deterministic evaluators ([`utility`]), the semilinear PDE solver for
//! the value process and its a priori bounds ([`solver`]), extraction of the
//! optimal feedback controls and the candidate deflator ([`strategy`]), and
//! Monte Carlo verification of budget and optimality identities ([`sim`]).

pub mod config;
pub mod error;
pub mod market;
pub mod sim;
pub mod solver;
pub mod strategy;
pub mod utility;

pub use error::{EzError, Result};
pub use market::{EzPreferences, MarketModel};
pub use solver::{Grid, ValueSurface};
