//! Exact and Monte Carlo tools for the mixing time of the biased exclusion
//! process on the `n`-path.

pub mod cli;
pub mod configspace;
pub mod couplings;
pub mod error;
pub mod kernel;
pub mod mixlab;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
