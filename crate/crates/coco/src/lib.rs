//! Simulation and verification toolkit for vanilla stochastic gradient
//! dynamics in unconstrained co-coercive games.
//!
//! The crate simulates the per-player update `x_{t+1} = x_t + beta_t (v(x_t) + M_{t+1})`
//! on two concrete game families (quadratic games with a negative semidefinite
//! interaction matrix and concave aggregate games), evaluates the closed-form
//! theoretical constants governing the dynamics, and checks the almost-sure,
//! time-average, and last-iterate convergence guarantees against seeded
//! Monte Carlo ensembles.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod game;
mod kahan;
pub mod noise;
pub mod schedule;

pub use error::{Error, Result};
pub use game::{ActionProfile, GameKind, GameSpec};
pub use noise::{NoiseModel, RngStream};
pub use schedule::{Exponent, Regime, StepsizeSchedule};
