//! Pathwise upper bounds for smooth functions of high-dimensional
//! estimators, with the estimators themselves: lasso, conservative lasso,
//! nodewise precision matrices, the desparsified conservative lasso, GMV
//! portfolio weights and power-series regression, plus a seeded Monte Carlo
//! harness.

pub mod bound;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod io;
pub mod montecarlo;
pub mod norms;
pub mod portfolio;
pub mod series;

mod serde_util;
#[cfg(test)]
mod testing;

pub use error::{Error, Result};
