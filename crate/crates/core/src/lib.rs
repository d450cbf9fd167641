//! Target trial emulation from observational data via predictive resampling.
//!
//! The crate ingests an observational cohort, models the design stage with
//! inverse-propensity (Hajek) weights, and forms posteriors for trial
//! estimands by forward-simulating the predictive distribution of future
//! trial data. Closed-form weighted-Dirichlet posteriors, an equivalent
//! sequential urn sampler, and flexible sum-of-trees outcome models are
//! provided, along with exact symbolic checks of the identification
//! assumptions on finite worlds.

pub mod cli;
pub mod data;
pub mod error;
pub mod ipw;
pub mod resampler;
pub mod rng;
pub mod stats;
pub mod trees;
pub mod verify;

pub use error::{Error, Result};
