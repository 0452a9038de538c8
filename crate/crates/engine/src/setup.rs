//! Shared experiment plumbing: loading inputs, simulating the outer
//! cross-section and building pricing contexts.

use anyhow::{anyhow, bail, Result};
use lsmc_core::instruments::{InstrumentKind, InstrumentSpec, PortfolioSpec, Position, SmoothingParams};
use lsmc_core::regression::standardize;
use lsmc_core::scenario::{
    pca_first_factor, simulate_outer, years, BarrierMonitor, GbmParams, HullWhite, Hw1fParams, MarketState,
    OuterConfig, PathFeatures, TimeGrid,
};
use lsmc_core::sensitivity::SweepContext;

use crate::config::{ExperimentConfig, SmoothingConfig};
use crate::market::Market;

/// Market, portfolio and the rates model of one run.
#[derive(Debug, Clone)]
pub struct Universe {
    pub market: Market,
    pub portfolio: PortfolioSpec,
    pub hw_params: Hw1fParams,
    pub hw: HullWhite,
}

impl Universe {
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let market = Market::load(&config.market)?;
        let text = std::fs::read_to_string(&config.portfolio)?;
        let portfolio = PortfolioSpec::from_toml_str(&text)?;
        for u in &portfolio.underlyings {
            market.equity(&u.id)?;
        }
        let hw_params = market.hw_params();
        let hw = HullWhite::new(&hw_params)?;
        Ok(Self {
            market,
            portfolio,
            hw_params,
            hw,
        })
    }

    pub fn position(&self, label: &str) -> Result<&Position> {
        self.portfolio
            .positions
            .iter()
            .find(|p| p.label == label)
            .ok_or_else(|| anyhow!("portfolio has no position labelled {label}"))
    }

    /// Position `label`, checked to be of `kind`.
    pub fn instrument(&self, label: &str, kind: InstrumentKind) -> Result<&Position> {
        let p = self.position(label)?;
        if p.spec.kind != kind {
            bail!("position {label} is a {:?}, expected {:?}", p.spec.kind, kind);
        }
        Ok(p)
    }

    pub fn gbm(&self, id: &str) -> Result<GbmParams> {
        self.market.gbm(id)
    }

    /// Model-implied barrier and strike sharpness for `spec` seen from today.
    pub fn smoothing(&self, spec: &InstrumentSpec, eps: &SmoothingConfig) -> Result<SmoothingParams> {
        let e = self.market.equity(&spec.underlying)?;
        Ok(SmoothingParams::model_implied(
            eps.eps1,
            eps.eps2,
            &spec.check_dates,
            e.spot,
            e.vol,
            self.hw.initial_curve(),
        )?)
    }

    /// Outer setup with `primary` carrying the features of `exotics` and every
    /// other portfolio underlying simulated alongside when `with_secondary`.
    pub fn outer_config(
        &self,
        primary: &str,
        exotics: &[(&InstrumentSpec, Option<&SmoothingParams>)],
        with_secondary: bool,
    ) -> Result<(OuterConfig, Vec<String>)> {
        let mut features = PathFeatures::default();
        for (spec, smoothing) in exotics {
            if spec.underlying != primary {
                bail!("exotic on {} cannot ride on primary {primary}", spec.underlying);
            }
            match spec.kind {
                InstrumentKind::AsianArith => {
                    if !features.asian_fixings.is_empty() {
                        bail!("only one Asian fixing schedule per outer simulation");
                    }
                    features.asian_fixings = spec.fixings.clone();
                }
                InstrumentKind::BarrierUpOut => {
                    if features.barrier.is_some() {
                        bail!("only one barrier per outer simulation");
                    }
                    let level = spec.barrier.ok_or_else(|| anyhow!("barrier level missing"))?;
                    let sharpness = (0..spec.check_dates.len())
                        .map(|l| smoothing.map_or(f64::INFINITY, |s| s.barrier_sharpness(l)))
                        .collect();
                    features.barrier = Some(BarrierMonitor {
                        level,
                        check_dates: spec.check_dates.clone(),
                        sharpness,
                    });
                }
                _ => {}
            }
        }
        let secondary: Vec<String> = if with_secondary {
            self.portfolio
                .underlyings
                .iter()
                .map(|u| u.id.clone())
                .filter(|id| id != primary)
                .collect()
        } else {
            Vec::new()
        };
        let config = OuterConfig {
            primary: self.gbm(primary)?,
            secondary: secondary.iter().map(|id| self.gbm(id)).collect::<Result<_>>()?,
            equity_correlation: self.market.equity_correlation,
            equity_rate_correlation: self.market.equity_rate_correlation,
            features,
        };
        Ok((config, secondary))
    }

    /// Outer setup driven by every exotic written on `primary`, with all other
    /// portfolio underlyings alongside. Sharing it keeps the scenarios of
    /// different experiments identical for equal sizes and seeds.
    pub fn portfolio_outer(&self, primary: &str, barrier_smoothing: Option<&SmoothingParams>) -> Result<OuterConfig> {
        let exotics: Vec<_> = self
            .portfolio
            .positions
            .iter()
            .filter(|p| p.spec.kind.is_exotic() && p.spec.underlying == primary)
            .map(|p| (&p.spec, barrier_smoothing))
            .collect();
        Ok(self.outer_config(primary, &exotics, true)?.0)
    }

    /// Simulates the run's scenarios up to `time_days` and extracts the regressors.
    pub fn cross_section(&self, config: &ExperimentConfig, outer: &OuterConfig) -> Result<CrossSection> {
        let grid = TimeGrid::from_days(&[config.time_days])?;
        let set = simulate_outer(outer, &self.hw_params, &grid, config.scenarios, config.scenario_seed)?;
        let states = set.cross_section(0);
        let secondary = (0..set.num_secondary())
            .map(|e| (0..set.num_scenarios()).map(|i| set.secondary_stock(e, i, 0)).collect())
            .collect();
        let tenors = self.market.curve_tenors();
        let curves = states
            .iter()
            .map(|s| self.hw.zero_curve(s.time, s.short_rate, &tenors))
            .collect::<lsmc_core::Result<Vec<_>>>()?;
        let factor = pca_first_factor(&curves)?;
        let n = curves.len() as f64;
        let curve_means = (0..tenors.len())
            .map(|j| curves.iter().map(|c| c[j]).sum::<f64>() / n)
            .collect();
        Ok(CrossSection {
            time: years(config.time_days),
            states,
            secondary,
            factor: factor.values,
            explained_variance: factor.explained_variance_ratio,
            loading: factor.loading,
            curve_means,
            curve_tenors: tenors,
        })
    }

    pub fn sweep_context<'a>(
        &'a self,
        gbm: &'a GbmParams,
        spec: &'a InstrumentSpec,
        curve_nodes: &'a [f64],
        smoothing: Option<&'a SmoothingParams>,
    ) -> SweepContext<'a> {
        SweepContext {
            gbm,
            hw: &self.hw,
            rate_corr: self.market.equity_rate_correlation,
            curve_nodes,
            spec,
            smoothing,
        }
    }
}

/// One time slice of the outer simulation.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub time: f64,
    pub states: Vec<MarketState>,
    /// Secondary equity prices, one vector per secondary equity.
    pub secondary: Vec<Vec<f64>>,
    /// First principal-component score of the simulated zero curves.
    pub factor: Vec<f64>,
    pub explained_variance: f64,
    pub loading: Vec<f64>,
    pub curve_means: Vec<f64>,
    pub curve_tenors: Vec<f64>,
}

impl CrossSection {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Factor score of the curve implied by `short_rate` at this time.
    pub fn factor_of(&self, hw: &HullWhite, short_rate: f64) -> Result<f64> {
        let curve = hw.zero_curve(self.time, short_rate, &self.curve_tenors)?;
        Ok(curve
            .iter()
            .zip(&self.curve_means)
            .zip(&self.loading)
            .map(|((z, m), l)| (z - m) * l)
            .sum())
    }

    pub fn stocks(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.stock).collect()
    }

    pub fn indexed(&self) -> Vec<(usize, MarketState)> {
        self.states.iter().copied().enumerate().collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<(usize, MarketState)> {
        indices.iter().map(|&i| (i, self.states[i])).collect()
    }

    /// `(S, P)` pairs in raw units.
    pub fn coords(&self) -> Vec<(f64, f64)> {
        self.states.iter().zip(&self.factor).map(|(s, &p)| (s.stock, p)).collect()
    }

    /// `(S, P)` pairs scaled to `[−1, 1]` per axis.
    pub fn standardized_coords(&self) -> Result<Vec<(f64, f64)>> {
        let s = standardize(&self.stocks())?;
        let p = standardize(&self.factor)?;
        Ok(s.into_iter().zip(p).collect())
    }
}

/// Day counts to year fractions.
pub fn day_tenors(days: &[f64]) -> Vec<f64> {
    days.iter().map(|&d| years(d)).collect()
}

/// Column labels for rho nodes given in days.
pub fn rho_labels(days: &[f64]) -> Vec<String> {
    days.iter().map(|d| format!("{d}d")).collect()
}
