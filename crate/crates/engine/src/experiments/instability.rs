//! Crude finite-difference delta and vega of the hard barrier over an
//! `(S, r)` grid at two path counts, showing how slowly the noise fades.

use anyhow::{bail, Context, Result};
use lsmc_core::instruments::InstrumentKind;
use lsmc_core::scenario::{GeneratorKind, MarketState};
use lsmc_core::sensitivity::{panel_sweep, BumpSpec, Method, SensitivityPanel};
use lsmc_core::stats::quantile_sorted;
use serde::Serialize;

use super::Outcome;
use crate::config::ExperimentConfig;
use crate::market::Market;
use crate::report::Bundle;
use crate::setup::Universe;

#[derive(Debug, Serialize)]
struct Roughness {
    paths: usize,
    /// Mean absolute second difference along the stock axis.
    delta: f64,
    vega: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    instrument: String,
    seed: u64,
    stock_points: usize,
    rate_points: usize,
    roughness: Vec<Roughness>,
    note: String,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn quantile_range(values: &[f64], (lo, hi): (f64, f64)) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile_sorted(&sorted, lo), quantile_sorted(&sorted, hi))
}

/// Mean |second difference| along rows of a row-major `rows × cols` grid.
fn roughness(values: &[f64], rows: usize, cols: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for r in 0..rows {
        let row = &values[r * cols..(r + 1) * cols];
        for w in row.windows(3) {
            total += (w[2] - 2.0 * w[1] + w[0]).abs();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

fn check_bumps(market: &Market, underlying: &str, bumps: &BumpSpec) -> Result<()> {
    let vol = market.equity(underlying)?.vol;
    if vol <= bumps.vol_abs {
        bail!("central vega bumps need vol above {}, got {vol}", bumps.vol_abs);
    }
    Ok(())
}

pub(crate) fn run(config: &ExperimentConfig, universe: &Universe, bundle: &mut Bundle) -> Result<Outcome> {
    let c = config.instability.as_ref().context("missing [instability] table")?;
    let spec = universe.instrument(&c.instrument, InstrumentKind::BarrierUpOut)?.spec.clone();
    let bumps = BumpSpec::default();
    check_bumps(&universe.market, &spec.underlying, &bumps)?;
    let gbm = universe.gbm(&spec.underlying)?;
    let outer = universe.portfolio_outer(&spec.underlying, None)?;
    let cross = universe.cross_section(config, &outer)?;
    let (s_lo, s_hi) = quantile_range(&cross.stocks(), c.quantile_range);
    let rates: Vec<f64> = cross.states.iter().map(|s| s.short_rate).collect();
    let (r_lo, r_hi) = quantile_range(&rates, c.quantile_range);
    let stock_axis = linspace(s_lo, s_hi, c.stock_points);
    let rate_axis = linspace(r_lo, r_hi, c.rate_points);
    let template = cross.states[0];
    let grid: Vec<(usize, MarketState)> = rate_axis
        .iter()
        .flat_map(|&r| stock_axis.iter().map(move |&s| (s, r)))
        .enumerate()
        .map(|(k, (stock, short_rate))| {
            (
                k,
                MarketState {
                    stock,
                    short_rate,
                    ..template
                },
            )
        })
        .collect();
    let factors: Vec<f64> = grid
        .iter()
        .map(|(_, s)| cross.factor_of(&universe.hw, s.short_rate))
        .collect::<Result<_>>()?;

    let nodes = universe.market.curve_tenors();
    let ctx = universe.sweep_context(&gbm, &spec, &nodes, None);
    let seed = config.seeds[0];
    let method = Method::FiniteDifferenceEquity(bumps);
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 7];
    let mut rough = Vec::new();
    for &p in &c.paths {
        log::info!("instability surface at {p} paths");
        let panels: Vec<SensitivityPanel> = panel_sweep(&ctx, &grid, method, p, GeneratorKind::PseudoRandom, seed)?;
        for ((_, s), (panel, f)) in grid.iter().zip(panels.iter().zip(&factors)) {
            for (col, v) in cols
                .iter_mut()
                .zip([p as f64, s.stock, s.short_rate, *f, panel.price, panel.delta, panel.vega])
            {
                col.push(v);
            }
        }
        let delta: Vec<f64> = panels.iter().map(|x| x.delta).collect();
        let vega: Vec<f64> = panels.iter().map(|x| x.vega).collect();
        rough.push(Roughness {
            paths: p,
            delta: roughness(&delta, c.rate_points, c.stock_points),
            vega: roughness(&vega, c.rate_points, c.stock_points),
        });
    }
    let header: Vec<String> = ["paths", "stock", "short_rate", "factor", "price", "delta", "vega"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    bundle.columns("instability_surface.csv", &header, &cols)?;
    bundle.json(
        "instability_summary.json",
        &Summary {
            instrument: c.instrument.clone(),
            seed,
            stock_points: c.stock_points,
            rate_points: c.rate_points,
            roughness: rough,
            note: format!(
                "hard payoff, central differences with independent paths per grid point; path counts {:?} \
                 (paper-scale counts {:?})",
                c.paths, c.paper_paths
            ),
        },
    )?;
    Ok(Outcome::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roughness_of_linear_rows_is_zero() {
        let v = [1.0, 2.0, 3.0, 10.0, 20.0, 30.0];
        assert_eq!(roughness(&v, 2, 3), 0.0);
        let bumpy = [0.0, 1.0, 0.0];
        assert_eq!(roughness(&bumpy, 1, 3), 2.0);
    }

    #[test]
    fn linspace_hits_both_ends() {
        assert_eq!(linspace(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
    }
}
