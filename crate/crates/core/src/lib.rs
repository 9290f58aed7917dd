//! Simulation and covariance computation for nonconventional sums of
//! functionals of finite-state Markov chains.

pub mod cli;
pub mod config;
pub mod covariance;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod markov;
pub mod martingale;
pub mod observables;
pub mod report;
pub mod rng;
pub mod schedule;
pub mod stats;

pub use error::{Error, Result};
