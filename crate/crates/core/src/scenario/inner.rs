//! Risk-neutral inner paths emanating from one outer state.
//!
//! At the origin the model reprices with the Hull–White zero curve implied by
//! the origin short rate, sampled at configured nodes and held as
//! piecewise-flat forwards `P_c`. Inner dynamics restart the Ornstein–Uhlenbeck
//! deviation `x` at zero, so with `I(τ) = ∫_0^τ x` and `V(τ) = Var I(τ)`:
//!
//! ```text
//! D(τ) = P_c(τ)·exp(−I(τ) − V(τ)/2)
//! S(τ) = S_t·exp(−ln P_c(τ) + I(τ) + V(τ)/2 − σ²τ/2 + σW(τ))   (short-rate drift)
//! S(τ) = S_t·exp((μ − σ²/2)τ + σW(τ))                           (constant drift)
//! ```
//!
//! The noise `(x, I, W)` depends only on the rate parameters and the dates,
//! never on the origin state, so one noise block can serve a whole
//! cross-section of scenarios and every bumped revaluation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::curve::ForwardCurve;
use super::hull_white::{bond_b, integrated_variance, step_covariance, HullWhite};
use super::rng::{NormalStream, StreamDomain};
use super::sobol::SobolNormals;
use super::{GbmParams, MarketState};
use crate::error::{invalid, Result};
use crate::linalg::cholesky_psd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    PseudoRandom,
    Sobol,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnerDrift {
    /// Risk-neutral drift equal to the simulated short rate.
    ShortRate,
    Constant(f64),
}

/// Pricing model at one outer state. Bumped copies drive finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerModel {
    origin: MarketState,
    vol: f64,
    drift: InnerDrift,
    mean_reversion: f64,
    rate_vol: f64,
    curve: ForwardCurve,
}

impl InnerModel {
    pub fn new(
        origin: MarketState,
        gbm: &GbmParams,
        hw: &HullWhite,
        curve_nodes: &[f64],
    ) -> Result<Self> {
        gbm.validate()?;
        let zeros = hw.zero_curve(origin.time, origin.short_rate, curve_nodes)?;
        let curve = ForwardCurve::from_zero_rates(curve_nodes.to_vec(), &zeros)?;
        let drift = gbm.drift_inner.map_or(InnerDrift::ShortRate, InnerDrift::Constant);
        Self::from_parts(origin, gbm.vol, drift, hw.mean_reversion(), hw.vol(), curve)
    }

    pub fn from_parts(
        origin: MarketState,
        vol: f64,
        drift: InnerDrift,
        mean_reversion: f64,
        rate_vol: f64,
        curve: ForwardCurve,
    ) -> Result<Self> {
        if !(origin.stock > 0.0) || !origin.stock.is_finite() {
            return invalid(format!("origin stock must be positive, got {}", origin.stock));
        }
        if !(vol >= 0.0) || !vol.is_finite() {
            return invalid(format!("volatility must be non-negative, got {vol}"));
        }
        if !(mean_reversion > 0.0) || !(rate_vol >= 0.0) {
            return invalid("invalid short-rate parameters");
        }
        Ok(Self {
            origin,
            vol,
            drift,
            mean_reversion,
            rate_vol,
            curve,
        })
    }

    pub fn origin(&self) -> &MarketState {
        &self.origin
    }

    pub fn spot(&self) -> f64 {
        self.origin.stock
    }

    pub fn vol(&self) -> f64 {
        self.vol
    }

    pub fn drift(&self) -> InnerDrift {
        self.drift
    }

    pub fn mean_reversion(&self) -> f64 {
        self.mean_reversion
    }

    pub fn rate_vol(&self) -> f64 {
        self.rate_vol
    }

    pub fn curve(&self) -> &ForwardCurve {
        &self.curve
    }

    pub fn with_spot(&self, spot: f64) -> Result<Self> {
        let mut origin = self.origin;
        origin.stock = spot;
        Self::from_parts(origin, self.vol, self.drift, self.mean_reversion, self.rate_vol, self.curve.clone())
    }

    pub fn with_vol(&self, vol: f64) -> Result<Self> {
        Self::from_parts(self.origin, vol, self.drift, self.mean_reversion, self.rate_vol, self.curve.clone())
    }

    /// Copy with forward period `k` of the pricing curve shifted by `shift`.
    pub fn with_forward_bump(&self, k: usize, shift: f64) -> Self {
        let mut out = self.clone();
        out.curve = self.curve.bumped(k, shift);
        out
    }

    /// Variance of `∫_0^τ x`.
    pub fn rate_integral_variance(&self, tau: f64) -> f64 {
        integrated_variance(self.mean_reversion, self.rate_vol, tau)
    }

    /// Deterministic part of `ln S(τ)/S_t`, i.e. everything but `I(τ)` (short-rate
    /// drift only) and `σW(τ)`.
    pub fn log_stock_drift(&self, tau: f64) -> f64 {
        match self.drift {
            InnerDrift::ShortRate => {
                -self.curve.log_discount(tau) + 0.5 * self.rate_integral_variance(tau)
                    - 0.5 * self.vol * self.vol * tau
            }
            InnerDrift::Constant(mu) => (mu - 0.5 * self.vol * self.vol) * tau,
        }
    }

    /// Deterministic part of `ln D(τ)`, everything but `−I(τ)`.
    pub fn log_discount_drift(&self, tau: f64) -> f64 {
        self.curve.log_discount(tau) - 0.5 * self.rate_integral_variance(tau)
    }

    /// Whether the integrated rate noise enters the stock.
    pub fn stock_carries_rate_noise(&self) -> bool {
        matches!(self.drift, InnerDrift::ShortRate)
    }

    /// Short rate at `origin + τ` given the deviation `x`.
    pub fn short_rate(&self, tau: f64, x: f64) -> f64 {
        let e = -(-self.mean_reversion * tau).exp_m1();
        self.curve.instantaneous_forward(tau)
            + self.rate_vol * self.rate_vol / (2.0 * self.mean_reversion * self.mean_reversion) * e * e
            + x
    }
}

/// Simulation dates measured from the origin and the exact step factorisations.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    taus: Vec<f64>,
    decay: Vec<f64>,
    b: Vec<f64>,
    chol: Vec<[[f64; 3]; 3]>,
}

impl PathPlan {
    /// `taus` are strictly increasing positive offsets from the origin.
    pub fn new(taus: Vec<f64>, mean_reversion: f64, rate_vol: f64, rate_corr: f64) -> Result<Self> {
        if taus.is_empty() {
            return invalid("an inner path needs at least one date");
        }
        if taus[0] <= 0.0 || taus.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("inner path dates must be strictly increasing and after the origin");
        }
        if !(mean_reversion > 0.0) || !(rate_vol >= 0.0) {
            return invalid("invalid short-rate parameters");
        }
        if !(-1.0..=1.0).contains(&rate_corr) {
            return invalid(format!("correlation {rate_corr} outside [-1, 1]"));
        }
        let mut decay = Vec::with_capacity(taus.len());
        let mut b = Vec::with_capacity(taus.len());
        let mut chol = Vec::with_capacity(taus.len());
        let mut prev = 0.0;
        for &t in &taus {
            let dt = t - prev;
            let rate = step_covariance(mean_reversion, rate_vol, dt);
            let bd = bond_b(mean_reversion, dt);
            let cwx = rate_corr * rate_vol * bd;
            let cwi = rate_corr * rate_vol / mean_reversion * (dt - bd);
            let cov = vec![
                vec![rate[0][0], rate[0][1], cwx],
                vec![rate[1][0], rate[1][1], cwi],
                vec![cwx, cwi, dt],
            ];
            let l = cholesky_psd(&cov)?;
            chol.push([
                [l[0][0], 0.0, 0.0],
                [l[1][0], l[1][1], 0.0],
                [l[2][0], l[2][1], l[2][2]],
            ]);
            decay.push((-mean_reversion * dt).exp());
            b.push(bd);
            prev = t;
        }
        Ok(Self { taus, decay, b, chol })
    }

    /// Plan for the absolute `dates` seen from `origin_time`; dates at the origin
    /// are taken as already observed and dropped.
    pub fn for_dates(
        origin_time: f64,
        dates: &[f64],
        mean_reversion: f64,
        rate_vol: f64,
        rate_corr: f64,
    ) -> Result<Self> {
        const TOL: f64 = 1e-12;
        if let Some(d) = dates.iter().find(|&&d| d < origin_time - TOL) {
            return invalid(format!("date {d} precedes the origin {origin_time}"));
        }
        let mut taus: Vec<f64> = dates
            .iter()
            .filter(|&&d| d > origin_time + TOL)
            .map(|&d| d - origin_time)
            .collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup_by(|a, b| (*a - *b).abs() < TOL);
        Self::new(taus, mean_reversion, rate_vol, rate_corr)
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Normal draws consumed per path, ordered `(z_x, z_I, z_S)` per step.
    pub fn dimension(&self) -> usize {
        3 * self.taus.len()
    }

    fn integrate(&self, z: &[f64], x_out: &mut [f64], i_out: &mut [f64], w_out: &mut [f64]) {
        let (mut x, mut int_x, mut w) = (0.0, 0.0, 0.0);
        for (j, l) in self.chol.iter().enumerate() {
            let (z0, z1, z2) = (z[3 * j], z[3 * j + 1], z[3 * j + 2]);
            let e_x = l[0][0] * z0;
            let e_i = l[1][0] * z0 + l[1][1] * z1;
            let e_w = l[2][0] * z0 + l[2][1] * z1 + l[2][2] * z2;
            int_x += x * self.b[j] + e_i;
            x = x * self.decay[j] + e_x;
            w += e_w;
            x_out[j] = x;
            i_out[j] = int_x;
            w_out[j] = w;
        }
    }
}

/// Where normal draws come from.
#[derive(Debug, Clone)]
pub enum NoiseSource {
    /// Counter-keyed pseudo-random substream `(seed, index)`.
    Pseudo { seed: u64, index: u64 },
    /// Rows of a shared shifted Sobol block.
    Sobol(Arc<SobolNormals>),
}

/// Per-path cumulative noise `(x, I, W)` on the plan dates, row-major `p × L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathNoise {
    paths: usize,
    dates: usize,
    x: Vec<f64>,
    integral: Vec<f64>,
    brownian: Vec<f64>,
}

impl PathNoise {
    pub fn generate(plan: &PathPlan, paths: usize, source: &NoiseSource) -> Result<Self> {
        if paths == 0 {
            return invalid("at least one inner path is required");
        }
        let l = plan.len();
        let mut out = Self {
            paths,
            dates: l,
            x: vec![0.0; paths * l],
            integral: vec![0.0; paths * l],
            brownian: vec![0.0; paths * l],
        };
        match source {
            NoiseSource::Pseudo { seed, index } => {
                let mut stream = NormalStream::new(*seed, StreamDomain::Inner, *index);
                let mut z = vec![0.0; plan.dimension()];
                for k in 0..paths {
                    stream.fill(&mut z);
                    out.write_path(plan, k, &z);
                }
            }
            NoiseSource::Sobol(block) => {
                if block.dimension() < plan.dimension() {
                    return invalid(format!(
                        "Sobol block has dimension {}, plan needs {}",
                        block.dimension(),
                        plan.dimension()
                    ));
                }
                if block.len() < paths {
                    return invalid(format!("Sobol block has {} points, {paths} requested", block.len()));
                }
                for k in 0..paths {
                    out.write_path(plan, k, &block.point(k)[..plan.dimension()]);
                }
            }
        }
        Ok(out)
    }

    fn write_path(&mut self, plan: &PathPlan, k: usize, z: &[f64]) {
        let r = k * self.dates..(k + 1) * self.dates;
        plan.integrate(
            z,
            &mut self.x[r.clone()],
            &mut self.integral[r.clone()],
            &mut self.brownian[r],
        );
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dates(&self) -> usize {
        self.dates
    }

    pub fn x(&self, path: usize) -> &[f64] {
        &self.x[path * self.dates..(path + 1) * self.dates]
    }

    pub fn integral(&self, path: usize) -> &[f64] {
        &self.integral[path * self.dates..(path + 1) * self.dates]
    }

    pub fn brownian(&self, path: usize) -> &[f64] {
        &self.brownian[path * self.dates..(path + 1) * self.dates]
    }
}

/// One inner path: market states on the plan dates plus the driving Brownian
/// values needed for pathwise vega.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerPath {
    pub states: Vec<MarketState>,
    pub brownian: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerPathBatch {
    pub origin: MarketState,
    pub horizon: f64,
    pub generator_kind: GeneratorKind,
    pub paths: Vec<InnerPath>,
}

impl InnerPathBatch {
    /// Discount factor from the origin to state `j` of `path`.
    pub fn discount(&self, path: usize, j: usize) -> f64 {
        self.origin.bank_account / self.paths[path].states[j].bank_account
    }
}

/// Materialises `p` inner paths on `fixing_dates` (absolute times). Running
/// average and barrier state are carried from the origin unchanged; payoffs
/// combine them with the path fixings.
pub fn simulate_inner(
    model: &InnerModel,
    rate_corr: f64,
    fixing_dates: &[f64],
    p: usize,
    kind: GeneratorKind,
    seed: u64,
) -> Result<InnerPathBatch> {
    let origin = *model.origin();
    let plan = PathPlan::for_dates(
        origin.time,
        fixing_dates,
        model.mean_reversion(),
        model.rate_vol(),
        rate_corr,
    )?;
    let source = match kind {
        GeneratorKind::PseudoRandom => NoiseSource::Pseudo { seed, index: 0 },
        GeneratorKind::Sobol => {
            NoiseSource::Sobol(Arc::new(SobolNormals::generate(p, plan.dimension(), seed)?))
        }
    };
    let noise = PathNoise::generate(&plan, p, &source)?;
    let taus = plan.taus();
    let log_s: Vec<f64> = taus.iter().map(|&t| model.log_stock_drift(t)).collect();
    let log_d: Vec<f64> = taus.iter().map(|&t| model.log_discount_drift(t)).collect();
    let rate_in_stock = if model.stock_carries_rate_noise() { 1.0 } else { 0.0 };
    let paths = (0..p)
        .map(|k| {
            let (x, int_x, w) = (noise.x(k), noise.integral(k), noise.brownian(k));
            let states = (0..plan.len())
                .map(|j| MarketState {
                    time: origin.time + taus[j],
                    stock: origin.stock
                        * (log_s[j] + rate_in_stock * int_x[j] + model.vol() * w[j]).exp(),
                    short_rate: model.short_rate(taus[j], x[j]),
                    running_average: origin.running_average,
                    barrier_breached: origin.barrier_breached,
                    bank_account: origin.bank_account / (log_d[j] - int_x[j]).exp(),
                })
                .collect();
            InnerPath {
                states,
                brownian: w.to_vec(),
            }
        })
        .collect();
    Ok(InnerPathBatch {
        origin,
        horizon: *taus.last().unwrap() + origin.time,
        generator_kind: kind,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mean;
    use crate::scenario::Hw1fParams;

    fn hw(vol: f64) -> HullWhite {
        HullWhite::new(&Hw1fParams {
            mean_reversion: 0.05,
            vol,
            initial_curve: vec![(0.25, 0.04), (1.0, 0.045), (5.0, 0.05)],
        })
        .unwrap()
    }

    fn gbm(vol: f64) -> GbmParams {
        GbmParams {
            spot: 100.0,
            drift_outer: 0.1,
            drift_inner: None,
            vol,
        }
    }

    fn origin(h: &HullWhite) -> MarketState {
        let mut o = MarketState::initial(100.0, h.alpha(0.5));
        o.time = 0.5;
        o
    }

    const NODES: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

    #[test]
    fn zero_vol_gives_deterministic_path() {
        let h = hw(0.0);
        let m = InnerModel::new(origin(&h), &gbm(0.0), &h, &NODES).unwrap();
        let b = simulate_inner(&m, 0.0, &[0.75, 1.0], 1, GeneratorKind::PseudoRandom, 3).unwrap();
        let fwd = 100.0 / m.curve().discount(0.5);
        assert!((b.paths[0].states[1].stock - fwd).abs() < 1e-10);
        assert!((b.discount(0, 1) - m.curve().discount(0.5)).abs() < 1e-14);
    }

    #[test]
    fn discounted_stock_is_a_martingale() {
        let h = hw(0.01);
        let m = InnerModel::new(origin(&h), &gbm(0.25), &h, &NODES).unwrap();
        let p = 1 << 17;
        let b = simulate_inner(&m, 0.3, &[0.6, 0.9, 1.3], p, GeneratorKind::PseudoRandom, 11).unwrap();
        let v: Vec<f64> = (0..p).map(|k| b.discount(k, 2) * b.paths[k].states[2].stock).collect();
        let se = (crate::linalg::variance(&v) / p as f64).sqrt();
        assert!((mean(&v) - 100.0).abs() < 3.0 * se, "{} ± {se}", mean(&v));
    }

    #[test]
    fn sobol_discount_matches_pricing_curve() {
        let h = hw(0.01);
        let m = InnerModel::new(origin(&h), &gbm(0.25), &h, &NODES).unwrap();
        let p = 1 << 14;
        let b = simulate_inner(&m, 0.0, &[1.5], p, GeneratorKind::Sobol, 2).unwrap();
        let d: Vec<f64> = (0..p).map(|k| b.discount(k, 0)).collect();
        let gap = (mean(&d) - m.curve().discount(1.0)).abs();
        // Well inside the pseudo-random standard error of about 4e-5.
        assert!(gap < 1e-5, "{gap}");
    }

    #[test]
    fn dates_before_origin_are_rejected() {
        let h = hw(0.01);
        let m = InnerModel::new(origin(&h), &gbm(0.25), &h, &NODES).unwrap();
        assert!(simulate_inner(&m, 0.0, &[0.25, 1.0], 4, GeneratorKind::PseudoRandom, 1).is_err());
        assert!(simulate_inner(&m, 0.0, &[1.0], 0, GeneratorKind::PseudoRandom, 1).is_err());
    }

    #[test]
    fn origin_date_counts_as_observed() {
        let plan = PathPlan::for_dates(0.5, &[0.5, 0.75], 0.05, 0.01, 0.0).unwrap();
        assert_eq!(plan.taus(), &[0.25]);
    }

    #[test]
    fn pricing_curve_matches_model_zero_curve_at_nodes() {
        let h = hw(0.01);
        let o = origin(&h);
        let m = InnerModel::new(o, &gbm(0.25), &h, &NODES).unwrap();
        let z = h.zero_curve(o.time, o.short_rate, &NODES).unwrap();
        for (t, z) in NODES.iter().zip(z) {
            assert!((m.curve().zero_rate(*t) - z).abs() < 1e-14);
        }
    }
}
