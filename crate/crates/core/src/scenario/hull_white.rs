//! Hull–White one-factor short-rate model fitted to an initial curve.
//!
//! ```text
//! dr = (θ(t) − a·r) dt + σ dW
//! ```
//!
//! The model is handled in its shifted form `r(t) = x(t) + α(t)` where `x` is an
//! Ornstein–Uhlenbeck process started at zero and
//! `α(t) = f(0,t) + σ²/(2a²)·(1 − e^{−at})²`, which reproduces the initial
//! discount curve exactly. All transitions are sampled exactly.

use serde::{Deserialize, Serialize};

use super::curve::ForwardCurve;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hw1fParams {
    pub mean_reversion: f64,
    pub vol: f64,
    /// `(tenor in years, continuously compounded zero rate)` pairs.
    pub initial_curve: Vec<(f64, f64)>,
}

impl Hw1fParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_reversion > 0.0) {
            return invalid("mean reversion must be positive");
        }
        if !(self.vol >= 0.0) {
            return invalid("short-rate volatility must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HullWhite {
    a: f64,
    sigma: f64,
    curve: ForwardCurve,
}

impl HullWhite {
    pub fn new(params: &Hw1fParams) -> Result<Self> {
        params.validate()?;
        let (tenors, zeros): (Vec<f64>, Vec<f64>) = params.initial_curve.iter().copied().unzip();
        let curve = ForwardCurve::from_zero_rates(tenors, &zeros)?;
        Ok(Self {
            a: params.mean_reversion,
            sigma: params.vol,
            curve,
        })
    }

    pub fn mean_reversion(&self) -> f64 {
        self.a
    }

    pub fn vol(&self) -> f64 {
        self.sigma
    }

    pub fn initial_curve(&self) -> &ForwardCurve {
        &self.curve
    }

    /// `B(τ) = (1 − e^{−aτ}) / a`.
    pub fn b(&self, tau: f64) -> f64 {
        bond_b(self.a, tau)
    }

    /// Variance of `∫_0^τ x(s) ds` given `x(0) = 0`.
    pub fn integrated_variance(&self, tau: f64) -> f64 {
        integrated_variance(self.a, self.sigma, tau)
    }

    pub fn alpha(&self, t: f64) -> f64 {
        let e = 1.0 - (-self.a * t).exp();
        self.curve.instantaneous_forward(t) + self.sigma * self.sigma / (2.0 * self.a * self.a) * e * e
    }

    /// `∫_0^t α(s) ds`.
    pub fn integrated_alpha(&self, t: f64) -> f64 {
        -self.curve.log_discount(t) + 0.5 * self.integrated_variance(t)
    }

    pub fn initial_short_rate(&self) -> f64 {
        self.alpha(0.0)
    }

    /// Zero-coupon bond price `P(t, T)` given the short rate at `t`.
    pub fn bond_price(&self, t: f64, maturity: f64, short_rate: f64) -> f64 {
        self.log_bond_price(t, maturity, short_rate).exp()
    }

    fn log_bond_price(&self, t: f64, maturity: f64, short_rate: f64) -> f64 {
        let x = short_rate - self.alpha(t);
        let tau = maturity - t;
        self.curve.log_discount(maturity) - self.curve.log_discount(t)
            + 0.5
                * (self.integrated_variance(tau) - self.integrated_variance(maturity)
                    + self.integrated_variance(t))
            - self.b(tau) * x
    }

    /// Continuously compounded zero rates at time `t` for tenors measured from `t`.
    pub fn zero_curve(&self, t: f64, short_rate: f64, tenors: &[f64]) -> Result<Vec<f64>> {
        tenors
            .iter()
            .map(|&tau| {
                if !(tau > 0.0) {
                    return invalid(format!("tenor {tau} must be positive"));
                }
                Ok(-self.log_bond_price(t, t + tau, short_rate) / tau)
            })
            .collect()
    }

    /// Covariance of the exact one-step innovations `(x, ∫x)` over `dt`.
    pub fn step_covariance(&self, dt: f64) -> [[f64; 2]; 2] {
        step_covariance(self.a, self.sigma, dt)
    }
}

pub(crate) fn bond_b(a: f64, tau: f64) -> f64 {
    -(-a * tau).exp_m1() / a
}

pub(crate) fn integrated_variance(a: f64, sigma: f64, tau: f64) -> f64 {
    if sigma == 0.0 || tau <= 0.0 {
        return 0.0;
    }
    let b1 = bond_b(a, tau);
    let b2 = bond_b(2.0 * a, tau);
    (sigma * sigma / (a * a) * (tau - 2.0 * b1 + b2)).max(0.0)
}

pub(crate) fn step_covariance(a: f64, sigma: f64, dt: f64) -> [[f64; 2]; 2] {
    let s2 = sigma * sigma;
    let var_x = s2 * bond_b(2.0 * a, dt);
    let var_i = integrated_variance(a, sigma, dt);
    let e = -(-a * dt).exp_m1();
    let cov = s2 / (2.0 * a * a) * e * e;
    [[var_x, cov], [cov, var_i]]
}
