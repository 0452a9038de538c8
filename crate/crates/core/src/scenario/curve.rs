//! Piecewise-flat forward curves.
//!
//! A curve is described by node tenors `T_1 < ... < T_m` (years, measured from
//! the curve's anchor date) and one instantaneous forward rate per period
//! `(T_{k-1}, T_k]` with `T_0 = 0`. Beyond the last node the last forward is
//! extended flat, so discount factors are log-linear between nodes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardCurve {
    tenors: Vec<f64>,
    forwards: Vec<f64>,
}

impl ForwardCurve {
    pub fn from_forwards(tenors: Vec<f64>, forwards: Vec<f64>) -> Result<Self> {
        validate_tenors(&tenors)?;
        if forwards.len() != tenors.len() {
            return invalid(format!(
                "{} forwards for {} tenors",
                forwards.len(),
                tenors.len()
            ));
        }
        if forwards.iter().any(|f| !f.is_finite()) {
            return invalid("non-finite forward rate");
        }
        Ok(Self { tenors, forwards })
    }

    /// Builds the curve whose continuously compounded zero rates at the nodes are `zeros`.
    pub fn from_zero_rates(tenors: Vec<f64>, zeros: &[f64]) -> Result<Self> {
        validate_tenors(&tenors)?;
        if zeros.len() != tenors.len() {
            return invalid(format!("{} zero rates for {} tenors", zeros.len(), tenors.len()));
        }
        let mut forwards = Vec::with_capacity(tenors.len());
        let mut prev_t = 0.0;
        let mut prev_tz = 0.0;
        for (&t, &z) in tenors.iter().zip(zeros) {
            forwards.push((t * z - prev_tz) / (t - prev_t));
            prev_t = t;
            prev_tz = t * z;
        }
        Self::from_forwards(tenors, forwards)
    }

    /// Flat curve at `rate` with a single node.
    pub fn flat(rate: f64) -> Self {
        Self {
            tenors: vec![1.0],
            forwards: vec![rate],
        }
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    pub fn forwards(&self) -> &[f64] {
        &self.forwards
    }

    pub fn num_periods(&self) -> usize {
        self.tenors.len()
    }

    /// Start and end of period `k`; the last period is open ended.
    pub fn period(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { 0.0 } else { self.tenors[k - 1] };
        let hi = if k + 1 == self.tenors.len() {
            f64::INFINITY
        } else {
            self.tenors[k]
        };
        (lo, hi)
    }

    /// Length of `[0, tau]` that falls into period `k`.
    pub fn overlap(&self, k: usize, tau: f64) -> f64 {
        let (lo, hi) = self.period(k);
        (tau.min(hi) - lo).max(0.0)
    }

    /// Writes `overlap(k, tau)` for every period into `out`.
    pub fn overlaps_into(&self, tau: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.tenors.len()) {
            *o = self.overlap(k, tau);
        }
    }

    pub fn log_discount(&self, tau: f64) -> f64 {
        let mut acc = 0.0;
        for (k, f) in self.forwards.iter().enumerate() {
            let o = self.overlap(k, tau);
            if o <= 0.0 {
                break;
            }
            acc -= f * o;
        }
        acc
    }

    pub fn discount(&self, tau: f64) -> f64 {
        self.log_discount(tau).exp()
    }

    /// Continuously compounded zero rate; the short-end limit at `tau = 0`.
    pub fn zero_rate(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return self.forwards[0];
        }
        -self.log_discount(tau) / tau
    }

    /// Right-continuous instantaneous forward rate.
    pub fn instantaneous_forward(&self, tau: f64) -> f64 {
        let k = self
            .tenors
            .iter()
            .position(|&t| tau < t)
            .unwrap_or(self.tenors.len() - 1);
        self.forwards[k]
    }

    /// Same curve with forward `k` shifted by `shift`.
    pub fn bumped(&self, k: usize, shift: f64) -> Self {
        let mut out = self.clone();
        out.forwards[k] += shift;
        out
    }
}

pub(crate) fn validate_tenors(tenors: &[f64]) -> Result<()> {
    if tenors.is_empty() {
        return invalid("curve needs at least one tenor");
    }
    if tenors.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return invalid("curve tenors must be positive and finite");
    }
    if tenors.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("curve tenors must be strictly increasing");
    }
    Ok(())
}
