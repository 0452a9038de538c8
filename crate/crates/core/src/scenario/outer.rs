use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hull_white::{bond_b, HullWhite};
use super::rng::{NormalStream, StreamDomain};
use super::{GbmParams, Hw1fParams, MarketState, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::linalg::cholesky_psd;

/// Barrier monitoring carried along outer scenarios as a running degree of truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierMonitor {
    pub level: f64,
    pub check_dates: Vec<f64>,
    /// Logistic sharpness per check date; `f64::INFINITY` gives the hard indicator.
    pub sharpness: Vec<f64>,
}

/// Path-dependent quantities registered by the instruments being simulated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathFeatures {
    /// `(time, weight)` Asian fixings.
    pub asian_fixings: Vec<(f64, f64)>,
    pub barrier: Option<BarrierMonitor>,
}

/// Outer simulation setup: the primary equity carries the path features,
/// secondary equities are simulated alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    pub primary: GbmParams,
    #[serde(default)]
    pub secondary: Vec<GbmParams>,
    #[serde(default)]
    pub equity_correlation: f64,
    #[serde(default)]
    pub equity_rate_correlation: f64,
    #[serde(default)]
    pub features: PathFeatures,
}

impl OuterConfig {
    pub fn single(primary: GbmParams) -> Self {
        Self {
            primary,
            secondary: Vec::new(),
            equity_correlation: 0.0,
            equity_rate_correlation: 0.0,
            features: PathFeatures::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterScenarioSet {
    grid: TimeGrid,
    n: usize,
    /// Row-major `n × K`.
    states: Vec<MarketState>,
    /// `[equity][n × K]` for the secondary equities.
    secondary: Vec<Vec<f64>>,
    seed: u64,
}

impl OuterScenarioSet {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_scenarios(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self, scenario: usize, k: usize) -> &MarketState {
        &self.states[scenario * self.grid.len() + k]
    }

    /// All scenarios at grid index `k`.
    pub fn cross_section(&self, k: usize) -> Vec<MarketState> {
        (0..self.n).map(|i| *self.state(i, k)).collect()
    }

    pub fn secondary_stock(&self, equity: usize, scenario: usize, k: usize) -> f64 {
        self.secondary[equity][scenario * self.grid.len() + k]
    }

    pub fn num_secondary(&self) -> usize {
        self.secondary.len()
    }

    /// CSV export with header `scenario,time,stock,short_rate,running_avg,barrier_dot,bank_account`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
        w.write_record([
            "scenario",
            "time",
            "stock",
            "short_rate",
            "running_avg",
            "barrier_dot",
            "bank_account",
        ])
        .map_err(io)?;
        for i in 0..self.n {
            for k in 0..self.grid.len() {
                let s = self.state(i, k);
                w.write_record([
                    i.to_string(),
                    s.time.to_string(),
                    s.stock.to_string(),
                    s.short_rate.to_string(),
                    s.running_average.to_string(),
                    s.barrier_breached.to_string(),
                    s.bank_account.to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))
    }
}

struct Step {
    time: f64,
    dt: f64,
    decay: f64,
    b: f64,
    chol: Vec<Vec<f64>>,
    record: Option<usize>,
    fixing_weight: f64,
    barrier_sharpness: Option<f64>,
}

/// Simulates `n` outer scenarios on `grid` with exact GBM and Hull–White transitions.
pub fn simulate_outer(
    config: &OuterConfig,
    hw_params: &Hw1fParams,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
) -> Result<OuterScenarioSet> {
    if n < 2 {
        return invalid("at least two outer scenarios are required");
    }
    config.primary.validate()?;
    for g in &config.secondary {
        g.validate()?;
    }
    for rho in [config.equity_correlation, config.equity_rate_correlation] {
        if !(-1.0..=1.0).contains(&rho) {
            return invalid(format!("correlation {rho} outside [-1, 1]"));
        }
    }
    let hw = HullWhite::new(hw_params)?;
    let steps = build_steps(config, &hw, grid)?;
    let k_len = grid.len();
    let n_eq = 1 + config.secondary.len();
    let dim = 2 + n_eq;
    let r0 = hw.initial_short_rate();

    let rows: Vec<(Vec<MarketState>, Vec<Vec<f64>>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut noise = NormalStream::new(seed, StreamDomain::Outer, i as u64);
            let mut z = vec![0.0; dim];
            let mut eps = vec![0.0; dim];
            let mut x = 0.0;
            let mut int_x = 0.0;
            let mut log_s: Vec<f64> = std::iter::once(&config.primary)
                .chain(&config.secondary)
                .map(|g| g.spot.ln())
                .collect();
            let mut running_average = 0.0;
            let mut alive = 1.0;
            let mut states = vec![MarketState::initial(config.primary.spot, r0); k_len];
            let mut secondary = vec![vec![0.0; k_len]; n_eq - 1];
            for step in &steps {
                noise.fill(&mut z);
                for (r, e) in eps.iter_mut().enumerate() {
                    *e = (0..=r).map(|c| step.chol[r][c] * z[c]).sum();
                }
                int_x += x * step.b + eps[1];
                x = x * step.decay + eps[0];
                for (j, ls) in log_s.iter_mut().enumerate() {
                    let g = if j == 0 { &config.primary } else { &config.secondary[j - 1] };
                    *ls += (g.drift_outer - 0.5 * g.vol * g.vol) * step.dt + g.vol * eps[2 + j];
                }
                let stock = log_s[0].exp();
                running_average += step.fixing_weight * stock;
                if let (Some(eps_l), Some(b)) = (step.barrier_sharpness, &config.features.barrier) {
                    alive *= survival_factor(eps_l, b.level - stock);
                }
                if let Some(k) = step.record {
                    states[k] = MarketState {
                        time: step.time,
                        stock,
                        short_rate: x + hw.alpha(step.time),
                        running_average,
                        barrier_breached: 1.0 - alive,
                        bank_account: (hw.integrated_alpha(step.time) + int_x).exp(),
                    };
                    for (j, sec) in secondary.iter_mut().enumerate() {
                        sec[k] = log_s[j + 1].exp();
                    }
                }
            }
            (states, secondary)
        })
        .collect();

    let mut states = Vec::with_capacity(n * k_len);
    let mut secondary = vec![Vec::with_capacity(n * k_len); n_eq - 1];
    for (row, sec) in rows {
        states.extend(row);
        for (dst, src) in secondary.iter_mut().zip(sec) {
            dst.extend(src);
        }
    }
    Ok(OuterScenarioSet {
        grid: grid.clone(),
        n,
        states,
        secondary,
        seed,
    })
}

/// Logistic survival factor `1 / (1 + e^{−ε·gap})`; the hard indicator for infinite ε.
pub(crate) fn survival_factor(sharpness: f64, gap: f64) -> f64 {
    if sharpness.is_infinite() {
        return if gap > 0.0 { 1.0 } else { 0.0 };
    }
    1.0 / (1.0 + (-sharpness * gap).exp())
}

fn build_steps(config: &OuterConfig, hw: &HullWhite, grid: &TimeGrid) -> Result<Vec<Step>> {
    const TOL: f64 = 1e-12;
    let horizon = *grid.points().last().unwrap();
    let mut times: Vec<f64> = grid.points().to_vec();
    times.extend(
        config
            .features
            .asian_fixings
            .iter()
            .map(|f| f.0)
            .filter(|&t| t > 0.0 && t <= horizon),
    );
    if let Some(b) = &config.features.barrier {
        if b.sharpness.len() != b.check_dates.len() {
            return invalid("one barrier sharpness per check date is required");
        }
        times.extend(b.check_dates.iter().copied().filter(|&t| t > 0.0 && t <= horizon));
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < TOL);

    let (a, sigma) = (hw.mean_reversion(), hw.vol());
    let rho_er = config.equity_rate_correlation;
    let rho_eq = config.equity_correlation;
    let n_eq = 1 + config.secondary.len();
    let mut prev = 0.0;
    let mut steps = Vec::with_capacity(times.len());
    for t in times {
        let dt = t - prev;
        let rate = hw.step_covariance(dt);
        let dim = 2 + n_eq;
        let mut cov = vec![vec![0.0; dim]; dim];
        cov[0][0] = rate[0][0];
        cov[0][1] = rate[0][1];
        cov[1][0] = rate[1][0];
        cov[1][1] = rate[1][1];
        let b = bond_b(a, dt);
        let cov_wx = rho_er * sigma * b;
        let cov_wi = rho_er * sigma / a * (dt - b);
        for j in 0..n_eq {
            let e = 2 + j;
            cov[e][0] = cov_wx;
            cov[0][e] = cov_wx;
            cov[e][1] = cov_wi;
            cov[1][e] = cov_wi;
            for l in 0..n_eq {
                cov[e][2 + l] = if l == j { dt } else { rho_eq * dt };
            }
        }
        let record = grid.points().iter().position(|&g| (g - t).abs() < TOL);
        let fixing_weight = config
            .features
            .asian_fixings
            .iter()
            .filter(|f| (f.0 - t).abs() < TOL)
            .map(|f| f.1)
            .sum();
        let barrier_sharpness = config.features.barrier.as_ref().and_then(|b| {
            b.check_dates
                .iter()
                .position(|&c| (c - t).abs() < TOL)
                .map(|i| b.sharpness[i])
        });
        steps.push(Step {
            time: t,
            dt,
            decay: (-a * dt).exp(),
            b,
            chol: cholesky_psd(&cov)?,
            record,
            fixing_weight,
            barrier_sharpness,
        });
        prev = t;
    }
    Ok(steps)
}
