//! Nested Monte Carlo sensitivity estimation with least-squares Monte Carlo
//! smoothing (orthogonal polynomials and thin plate splines) and SIMM
//! initial-margin aggregation.

pub mod error;
pub mod instruments;
pub mod linalg;
pub mod regression;
pub mod sensitivity;
pub mod simm;
pub mod stats;
pub mod tps;
pub mod scenario;

pub use error::{Error, Result};
