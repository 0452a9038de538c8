//! Cross-sectional least-squares smoothing with Forsythe orthogonal polynomials.

mod basis;
mod least_squares;

pub use basis::{forsythe_basis, standardize, BasisSpec, DesignMatrix};
pub use least_squares::{fit, smooth_panels, LeastSquares, RegressionFit};
