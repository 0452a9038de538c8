//! Outer (real-world) scenarios and inner (risk-neutral) path batches under
//! GBM equities and a Hull–White short rate.

mod curve;
mod hull_white;
mod inner;
mod outer;
mod pca;
mod rng;
mod sobol;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use curve::ForwardCurve;
pub use hull_white::{HullWhite, Hw1fParams};
pub use inner::{
    simulate_inner, GeneratorKind, InnerDrift, InnerModel, InnerPath, InnerPathBatch, NoiseSource,
    PathNoise, PathPlan,
};
pub use outer::{
    simulate_outer, BarrierMonitor, OuterConfig, OuterScenarioSet, PathFeatures,
};
pub use pca::{pca_first_factor, CurveFactor};
pub use rng::{stream, stream_key, NormalStream, StreamDomain};
pub use sobol::{inverse_normal_cdf, Sobol, SobolNormals, MAX_DIMENSION as SOBOL_MAX_DIMENSION};

pub const DAYS_PER_YEAR: f64 = 365.0;

/// Converts a day count to a year fraction (ACT/365).
pub fn years(days: f64) -> f64 {
    days / DAYS_PER_YEAR
}

/// Strictly increasing positive observation times in years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return invalid("time grid is empty");
        }
        if points.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return invalid("time grid points must be positive");
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("time grid must be strictly increasing");
        }
        Ok(Self { points })
    }

    pub fn from_days(days: &[f64]) -> Result<Self> {
        Self::new(days.iter().map(|&d| years(d)).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub spot: f64,
    /// Real-world drift used for outer scenarios.
    pub drift_outer: f64,
    /// Constant risk-neutral drift for inner paths; `None` ties the drift to the
    /// simulated short rate.
    #[serde(default)]
    pub drift_inner: Option<f64>,
    pub vol: f64,
}

impl GbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0) || !self.spot.is_finite() {
            return invalid(format!("spot must be positive, got {}", self.spot));
        }
        if !(self.vol >= 0.0) || !self.vol.is_finite() {
            return invalid(format!("volatility must be non-negative, got {}", self.vol));
        }
        Ok(())
    }
}

/// Market state of one scenario at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub time: f64,
    pub stock: f64,
    pub short_rate: f64,
    /// Weighted sum of the Asian fixings observed so far.
    pub running_average: f64,
    /// Degree of truth that the barrier has already been breached.
    pub barrier_breached: f64,
    /// `exp(∫_0^t r ds)`.
    pub bank_account: f64,
}

impl MarketState {
    pub fn initial(spot: f64, short_rate: f64) -> Self {
        Self {
            time: 0.0,
            stock: spot,
            short_rate,
            running_average: 0.0,
            barrier_breached: 0.0,
            bank_account: 1.0,
        }
    }
}
