//! Single-scenario estimators over one block of inner-path noise.
//!
//! Pathwise adjoint, per path with `a_j = D·∂g/∂S_j·S_j`:
//!
//! ```text
//! delta   = Σ_j a_j / S_t
//! vega    = Σ_j a_j (W_j − σ τ_j)
//! rho_k   = Σ_j a_j o_k(τ_j) − D·g·o_k(τ_L)      (short-rate drift)
//! ```
//!
//! where `o_k(τ)` is the overlap of `[0, τ]` with forward period `k`. With a
//! constant inner drift the stock does not load on the curve and only the
//! discount term remains.

use serde::{Deserialize, Serialize};

use super::{forward_to_zero_rho, SensitivityPanel, StandardErrors};
use crate::error::{invalid, Result};
use crate::instruments::BoundPayoff;
use crate::scenario::{InnerModel, InnerPathBatch, PathNoise, PathPlan};

/// Arithmetic mean of discounted path payoffs.
pub fn mc_estimate(discounted_payoffs: &[f64]) -> Result<f64> {
    if discounted_payoffs.is_empty() {
        return invalid("no paths to average");
    }
    Ok(discounted_payoffs.iter().sum::<f64>() / discounted_payoffs.len() as f64)
}

/// Mean of `payoff(path, stocks, discount at last date)` over a materialised batch.
pub fn mc_estimate_batch<F>(batch: &InnerPathBatch, payoff: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let values: Vec<f64> = (0..batch.paths.len())
        .map(|k| {
            let states = &batch.paths[k].states;
            let stocks: Vec<f64> = states.iter().map(|s| s.stock).collect();
            payoff(&stocks) * batch.discount(k, states.len() - 1)
        })
        .collect();
    mc_estimate(&values)
}

/// Central finite-difference bump sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    /// Relative stock bump.
    pub stock_rel: f64,
    /// Absolute volatility bump.
    pub vol_abs: f64,
    /// Absolute forward-rate bump.
    pub rate_abs: f64,
}

impl Default for BumpSpec {
    fn default() -> Self {
        Self {
            stock_rel: 0.01,
            vol_abs: 0.01,
            rate_abs: 1e-4,
        }
    }
}

impl BumpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.stock_rel > 0.0 && self.vol_abs > 0.0 && self.rate_abs > 0.0) {
            return invalid("bump sizes must be positive");
        }
        Ok(())
    }
}

struct Layout {
    log_drift: Vec<f64>,
    log_discount: f64,
    rate_in_stock: f64,
    /// `o_k(τ_j)` row-major `L × K`.
    overlaps: Vec<f64>,
    /// `o_k(τ_L)`.
    pay_overlaps: Vec<f64>,
}

fn layout(model: &InnerModel, plan: &PathPlan) -> Layout {
    let taus = plan.taus();
    let k = model.curve().num_periods();
    let ln_s = model.spot().ln();
    let mut overlaps = vec![0.0; taus.len() * k];
    for (j, &t) in taus.iter().enumerate() {
        model.curve().overlaps_into(t, &mut overlaps[j * k..(j + 1) * k]);
    }
    let tau_pay = *taus.last().unwrap();
    let mut pay_overlaps = vec![0.0; k];
    model.curve().overlaps_into(tau_pay, &mut pay_overlaps);
    Layout {
        log_drift: taus.iter().map(|&t| ln_s + model.log_stock_drift(t)).collect(),
        log_discount: model.log_discount_drift(tau_pay),
        rate_in_stock: if model.stock_carries_rate_noise() { 1.0 } else { 0.0 },
        overlaps,
        pay_overlaps,
    }
}

fn check_alignment(payoff: &BoundPayoff, plan: &PathPlan, noise: &PathNoise, model: &InnerModel) -> Result<()> {
    if plan.len() != payoff.dates.len() || noise.dates() != plan.len() {
        return invalid("payoff dates, plan and noise disagree in length");
    }
    let t0 = model.origin().time;
    for (d, tau) in payoff.dates.iter().zip(plan.taus()) {
        if (d - t0 - tau).abs() > 1e-10 {
            return invalid("path plan does not match the payoff dates");
        }
    }
    Ok(())
}

/// Discounted price averaged over the noise block; the revaluation kernel of
/// the finite-difference estimator.
pub fn revalue(model: &InnerModel, payoff: &BoundPayoff, plan: &PathPlan, noise: &PathNoise) -> Result<f64> {
    check_alignment(payoff, plan, noise, model)?;
    let lay = layout(model, plan);
    let l = plan.len();
    let vol = model.vol();
    let mut s = vec![0.0; l];
    let mut sum = 0.0;
    for k in 0..noise.paths() {
        let (int_x, w) = (noise.integral(k), noise.brownian(k));
        for j in 0..l {
            s[j] = (lay.log_drift[j] + lay.rate_in_stock * int_x[j] + vol * w[j]).exp();
        }
        let d = (lay.log_discount - int_x[l - 1]).exp();
        sum += d * payoff.payoff.evaluate(&s);
    }
    Ok(sum / noise.paths() as f64)
}

/// One-pass reverse-mode estimate of price, delta, vega and forward/zero rhos,
/// with Monte Carlo standard errors. Rejects non-Lipschitz payoffs.
pub fn pathwise_adjoint(
    model: &InnerModel,
    payoff: &BoundPayoff,
    plan: &PathPlan,
    noise: &PathNoise,
) -> Result<(SensitivityPanel, StandardErrors)> {
    payoff.ensure_lipschitz()?;
    check_alignment(payoff, plan, noise, model)?;
    let lay = layout(model, plan);
    let l = plan.len();
    let nk = model.curve().num_periods();
    let taus = plan.taus();
    let (vol, spot) = (model.vol(), model.spot());
    let mut s = vec![0.0; l];
    let mut grad = vec![0.0; l];
    let mut adj = vec![0.0; l];
    let mut rho_path = vec![0.0; nk];
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    let mut rho_sum = vec![0.0; nk];
    let mut rho_sq = vec![0.0; nk];
    for k in 0..noise.paths() {
        let (int_x, w) = (noise.integral(k), noise.brownian(k));
        for j in 0..l {
            s[j] = (lay.log_drift[j] + lay.rate_in_stock * int_x[j] + vol * w[j]).exp();
        }
        let d = (lay.log_discount - int_x[l - 1]).exp();
        let g = payoff.payoff.evaluate_with_gradient(&s, &mut grad);
        let price = d * g;
        let mut delta = 0.0;
        let mut vega = 0.0;
        for j in 0..l {
            adj[j] = d * grad[j] * s[j];
            delta += adj[j];
            vega += adj[j] * (w[j] - vol * taus[j]);
        }
        delta /= spot;
        for (r, o) in rho_path.iter_mut().zip(&lay.pay_overlaps) {
            *r = -price * o;
        }
        if lay.rate_in_stock != 0.0 {
            for j in 0..l {
                if adj[j] != 0.0 {
                    let row = &lay.overlaps[j * nk..(j + 1) * nk];
                    for (r, o) in rho_path.iter_mut().zip(row) {
                        *r += adj[j] * o;
                    }
                }
            }
        }
        for (i, v) in [price, delta, vega].into_iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
        for ((acc, acc2), r) in rho_sum.iter_mut().zip(rho_sq.iter_mut()).zip(&rho_path) {
            *acc += r;
            *acc2 += r * r;
        }
    }
    let p = noise.paths() as f64;
    let se = |s: f64, s2: f64| {
        if p < 2.0 {
            return f64::NAN;
        }
        let mean = s / p;
        ((s2 / p - mean * mean).max(0.0) * p / (p - 1.0) / p).sqrt()
    };
    let rho_fwd: Vec<f64> = rho_sum.iter().map(|r| r / p).collect();
    let panel = SensitivityPanel {
        scenario_index: 0,
        price: sum[0] / p,
        delta: sum[1] / p,
        vega: sum[2] / p,
        rho_zero: forward_to_zero_rho(&rho_fwd, model.curve().tenors())?,
        rho_fwd,
        paths_used: noise.paths(),
    };
    let errors = StandardErrors {
        price: se(sum[0], sq[0]),
        delta: se(sum[1], sq[1]),
        vega: se(sum[2], sq[2]),
        rho_fwd: rho_sum.iter().zip(&rho_sq).map(|(a, b)| se(*a, *b)).collect(),
    };
    Ok((panel, errors))
}

/// Central differences with common random numbers: every revaluation reuses
/// `noise`. Rate bumps shift one forward period of the pricing curve at a time.
pub fn fd_sensitivity(
    model: &InnerModel,
    payoff: &BoundPayoff,
    plan: &PathPlan,
    noise: &PathNoise,
    bumps: &BumpSpec,
) -> Result<SensitivityPanel> {
    bumps.validate()?;
    let price = revalue(model, payoff, plan, noise)?;
    let spot = model.spot();
    let hs = bumps.stock_rel * spot;
    let central = |up: &InnerModel, down: &InnerModel, h: f64| -> Result<f64> {
        Ok((revalue(up, payoff, plan, noise)? - revalue(down, payoff, plan, noise)?) / (2.0 * h))
    };
    let delta = central(&model.with_spot(spot + hs)?, &model.with_spot(spot - hs)?, hs)?;
    let hv = bumps.vol_abs;
    let vega = central(&model.with_vol(model.vol() + hv)?, &model.with_vol(model.vol() - hv)?, hv)?;
    let hr = bumps.rate_abs;
    let rho_fwd = (0..model.curve().num_periods())
        .map(|k| central(&model.with_forward_bump(k, hr), &model.with_forward_bump(k, -hr), hr))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityPanel {
        scenario_index: 0,
        price,
        delta,
        vega,
        rho_zero: forward_to_zero_rho(&rho_fwd, model.curve().tenors())?,
        rho_fwd,
        paths_used: noise.paths(),
    })
}

/// Delta and vega only, by central differences with common random numbers;
/// the rho vectors of the returned panel are empty.
pub fn fd_equity_sensitivity(
    model: &InnerModel,
    payoff: &BoundPayoff,
    plan: &PathPlan,
    noise: &PathNoise,
    bumps: &BumpSpec,
) -> Result<SensitivityPanel> {
    bumps.validate()?;
    let price = revalue(model, payoff, plan, noise)?;
    let spot = model.spot();
    let hs = bumps.stock_rel * spot;
    let hv = bumps.vol_abs;
    let up_down = |up: &InnerModel, down: &InnerModel, h: f64| -> Result<f64> {
        Ok((revalue(up, payoff, plan, noise)? - revalue(down, payoff, plan, noise)?) / (2.0 * h))
    };
    Ok(SensitivityPanel {
        scenario_index: 0,
        price,
        delta: up_down(&model.with_spot(spot + hs)?, &model.with_spot(spot - hs)?, hs)?,
        vega: up_down(&model.with_vol(model.vol() + hv)?, &model.with_vol(model.vol() - hv)?, hv)?,
        rho_fwd: Vec::new(),
        rho_zero: Vec::new(),
        paths_used: noise.paths(),
    })
}
