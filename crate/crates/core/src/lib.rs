//! Simulation of federated collaborative online monitoring: a population of
//! units, a server that may monitor only a few of them per trial, and
//! policies that decide which ones.

pub mod baselines;
pub mod environment;
pub mod error;
pub mod fcom;
pub mod harness;
pub mod linalg;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
