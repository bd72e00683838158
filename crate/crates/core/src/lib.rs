//! Gibbs partition-function ratio estimation with adaptive cooling schedules.

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod models;
pub mod numeric;
pub mod qsim;
pub mod sampling;
pub mod schedule;

pub use error::{Error, Result};
