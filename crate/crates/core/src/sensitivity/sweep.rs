use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fd_equity_sensitivity, fd_sensitivity, pathwise_adjoint, BumpSpec, SensitivityPanel};
use crate::error::{invalid, Result};
use crate::instruments::{BoundPayoff, InstrumentSpec, SmoothingParams};
use crate::scenario::{
    GbmParams, GeneratorKind, HullWhite, InnerModel, MarketState, NoiseSource, PathNoise, PathPlan, SobolNormals,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adjoint,
    FiniteDifference(BumpSpec),
    /// Delta and vega only.
    FiniteDifferenceEquity(BumpSpec),
}

/// Everything a sweep needs besides the scenarios themselves.
#[derive(Debug, Clone, Copy)]
pub struct SweepContext<'a> {
    pub gbm: &'a GbmParams,
    pub hw: &'a HullWhite,
    pub rate_corr: f64,
    /// Pricing-curve nodes; rhos are keyed by the periods they delimit.
    pub curve_nodes: &'a [f64],
    pub spec: &'a InstrumentSpec,
    /// `None` prices barriers with the hard knock-out.
    pub smoothing: Option<&'a SmoothingParams>,
}

/// Crude panels for `scenarios` (index, state) of one cross-section. Pseudo-random
/// noise is keyed by `(seed, scenario index)`; Sobol noise is one shifted block
/// shared by every scenario.
pub fn panel_sweep(
    ctx: &SweepContext<'_>,
    scenarios: &[(usize, MarketState)],
    method: Method,
    p: usize,
    kind: GeneratorKind,
    seed: u64,
) -> Result<Vec<SensitivityPanel>> {
    let Some(&(_, first)) = scenarios.first() else {
        return Ok(Vec::new());
    };
    if scenarios.iter().any(|(_, s)| s.time != first.time) {
        return invalid("a sweep covers one cross-section; scenario times differ");
    }
    if p == 0 {
        return invalid("at least one inner path is required");
    }
    let template = BoundPayoff::new(ctx.spec, &first, ctx.smoothing)?;
    if method == Method::Adjoint {
        template.ensure_lipschitz()?;
    }
    let plan = PathPlan::for_dates(
        first.time,
        &template.dates,
        ctx.hw.mean_reversion(),
        ctx.hw.vol(),
        ctx.rate_corr,
    )?;
    let shared = match kind {
        GeneratorKind::Sobol => {
            let block = Arc::new(SobolNormals::generate(p, plan.dimension(), seed)?);
            Some(PathNoise::generate(&plan, p, &NoiseSource::Sobol(block))?)
        }
        GeneratorKind::PseudoRandom => None,
    };
    scenarios
        .par_iter()
        .map(|&(index, state)| {
            let model = InnerModel::new(state, ctx.gbm, ctx.hw, ctx.curve_nodes)?;
            let payoff = BoundPayoff::new(ctx.spec, &state, ctx.smoothing)?;
            let own;
            let noise = match &shared {
                Some(n) => n,
                None => {
                    own = PathNoise::generate(&plan, p, &NoiseSource::Pseudo { seed, index: index as u64 })?;
                    &own
                }
            };
            let mut panel = match method {
                Method::Adjoint => pathwise_adjoint(&model, &payoff, &plan, noise)?.0,
                Method::FiniteDifference(b) => fd_sensitivity(&model, &payoff, &plan, noise, &b)?,
                Method::FiniteDifferenceEquity(b) => fd_equity_sensitivity(&model, &payoff, &plan, noise, &b)?,
            };
            panel.scenario_index = index;
            Ok(panel)
        })
        .collect()
}
