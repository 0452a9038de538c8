//! Test-portfolio instruments: specifications, smoothed path payoffs and
//! closed forms for the vanilla subset.

mod closed_form;
mod payoff;
mod portfolio;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use closed_form::{closed_form, black_scholes, ClosedForm};
pub use payoff::{
    degree_of_truth, logistic, payoff_asian, payoff_barrier_hard, payoff_barrier_smoothed,
    BoundPayoff, PathPayoff, SmoothingParams,
};
pub use portfolio::{Position, PortfolioSpec, Underlying};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentKind {
    EuropeanCall,
    EuropeanPut,
    Forward,
    Futures,
    AsianArith,
    BarrierUpOut,
}

impl InstrumentKind {
    pub fn is_exotic(self) -> bool {
        matches!(self, Self::AsianArith | Self::BarrierUpOut)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSpec {
    pub kind: InstrumentKind,
    pub underlying: String,
    pub strike: f64,
    /// Years from today.
    pub maturity: f64,
    /// `(time, weight)` Asian fixings.
    #[serde(default)]
    pub fixings: Vec<(f64, f64)>,
    #[serde(default)]
    pub barrier: Option<f64>,
    /// Barrier check dates; the last one is the maturity.
    #[serde(default)]
    pub check_dates: Vec<f64>,
    #[serde(default)]
    pub window_start: Option<f64>,
}

impl InstrumentSpec {
    pub fn vanilla(kind: InstrumentKind, underlying: &str, strike: f64, maturity: f64) -> Self {
        Self {
            kind,
            underlying: underlying.to_string(),
            strike,
            maturity,
            fixings: Vec::new(),
            barrier: None,
            check_dates: Vec::new(),
            window_start: None,
        }
    }

    pub fn asian(underlying: &str, strike: f64, fixings: Vec<(f64, f64)>) -> Self {
        let maturity = fixings.last().map_or(0.0, |f| f.0);
        Self {
            fixings,
            ..Self::vanilla(InstrumentKind::AsianArith, underlying, strike, maturity)
        }
    }

    pub fn barrier_up_out(
        underlying: &str,
        strike: f64,
        barrier: f64,
        window_start: f64,
        check_dates: Vec<f64>,
    ) -> Self {
        let maturity = check_dates.last().copied().unwrap_or(0.0);
        Self {
            barrier: Some(barrier),
            check_dates,
            window_start: Some(window_start),
            ..Self::vanilla(InstrumentKind::BarrierUpOut, underlying, strike, maturity)
        }
    }

    pub fn validate(&self) -> Result<()> {
        const TOL: f64 = 1e-12;
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return invalid(format!("maturity must be positive, got {}", self.maturity));
        }
        if !(self.strike >= 0.0) || !self.strike.is_finite() {
            return invalid(format!("strike must be non-negative, got {}", self.strike));
        }
        match self.kind {
            InstrumentKind::AsianArith => {
                if self.fixings.is_empty() {
                    return invalid("Asian option without fixings");
                }
                if self.fixings.iter().any(|f| !(f.1 >= 0.0) || !(f.0 > 0.0)) {
                    return invalid("Asian fixings need positive dates and non-negative weights");
                }
                if self.fixings.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return invalid("Asian fixing dates must be strictly increasing");
                }
                let total: f64 = self.fixings.iter().map(|f| f.1).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return invalid(format!("Asian weights sum to {total}, not 1"));
                }
                if (self.fixings.last().unwrap().0 - self.maturity).abs() > TOL {
                    return invalid("the last Asian fixing must be the maturity");
                }
            }
            InstrumentKind::BarrierUpOut => {
                let Some(b) = self.barrier else {
                    return invalid("barrier option without a barrier level");
                };
                if !(b > 0.0) {
                    return invalid("barrier level must be positive");
                }
                let start = self.window_start.unwrap_or(0.0);
                if self.check_dates.is_empty() {
                    return invalid("barrier option without check dates");
                }
                if self.check_dates.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid("barrier check dates must be strictly increasing");
                }
                if self.check_dates[0] < start - TOL
                    || *self.check_dates.last().unwrap() > self.maturity + TOL
                {
                    return invalid("barrier check dates must lie in [window start, maturity]");
                }
                if (self.check_dates.last().unwrap() - self.maturity).abs() > TOL {
                    return invalid("the last barrier check date must be the maturity");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// All dates the instrument observes, ending with the maturity.
    pub fn observation_dates(&self) -> Vec<f64> {
        match self.kind {
            InstrumentKind::AsianArith => self.fixings.iter().map(|f| f.0).collect(),
            InstrumentKind::BarrierUpOut => self.check_dates.clone(),
            _ => vec![self.maturity],
        }
    }
}
