//! Thin-plate-spline smoothing over two explanatory variables with
//! nearest-neighbour thinning of the centres.

mod model;
mod thinning;

pub use model::{factorization_count, tps_kernel, TpsEvaluator, TpsFit, TpsModel};
pub use thinning::{thin_scenarios, ThinnedSet};
