//! Symmetrized Pearson chi-square goodness-of-fit testing for the innovation
//! law of a stationary AR(p) process, with tools to study its level and power
//! under local alternatives and gross-error contamination.

pub mod ar_sim;
pub mod chisq_dist;
pub mod distributions;
pub mod edf_shift;
pub mod error;
pub mod estimation;
pub mod montecarlo;
pub mod pearson;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
