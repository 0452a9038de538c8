//! Portfolio SIMM per scenario: vanillas from closed forms, the Asian from
//! polynomial LSMC and the barrier from TPS-LSMC, compared with the SIMM of
//! benchmark sensitivities.

use anyhow::{Context, Result};
use lsmc_core::instruments::{closed_form, InstrumentKind, Position};
use lsmc_core::regression::{smooth_panels, BasisSpec};
use lsmc_core::scenario::{ForwardCurve, GeneratorKind, MarketState};
use lsmc_core::sensitivity::{forward_to_zero_rho, panel_sweep, Method, SensitivityPanel};
use lsmc_core::simm::{
    compute_simm, marginal_simm, panel_records, write_records_csv, PanelRecordContext, SensitivityRecord, SimmParams,
};
use lsmc_core::stats::{ks_two_sample, qq_points, quantile_sorted, relative_error_histogram, HistogramBins};
use rayon::prelude::*;
use serde::Serialize;

use super::barrier::ThinnedTps;
use super::{benchmark, seed_gate, Outcome};
use crate::cache::BenchmarkCache;
use crate::config::ExperimentConfig;
use crate::report::{Bundle, KsRow, Quantity, SpeedupReport};
use crate::setup::{day_tenors, CrossSection, Universe};

#[derive(Debug, Serialize)]
struct Distribution {
    mean: f64,
    p05: f64,
    median: f64,
    p95: f64,
}

impl Distribution {
    fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p05: quantile_sorted(&sorted, 0.05),
            median: quantile_sorted(&sorted, 0.5),
            p95: quantile_sorted(&sorted, 0.95),
        }
    }
}

#[derive(Debug, Serialize)]
struct SeedResult {
    seed: u64,
    fraction_within_band: f64,
    min_error_pct: f64,
    max_error_pct: f64,
    ks_d_statistic: f64,
    ks_p_value: f64,
}

#[derive(Debug, Serialize)]
struct MarginalReport {
    positions: Vec<String>,
    /// Share of benchmark SIMM attributable to the exotics, over scenarios.
    share: Distribution,
}

#[derive(Debug, Serialize)]
struct SimmReport {
    params_version: String,
    psi_ir_eq: f64,
    scenarios: usize,
    error_band_pct: f64,
    benchmark_simm: Distribution,
    seeds: Vec<SeedResult>,
    marginal_simm: MarginalReport,
}

#[derive(Debug, Serialize)]
struct SpeedupFile {
    asian: SpeedupReport,
    barrier: SpeedupReport,
}

/// Record context of `position` at scenario `i`.
fn record_context(
    universe: &Universe,
    position: &Position,
    spot: f64,
    time: f64,
    rate_tenors: &[f64],
) -> Result<PanelRecordContext> {
    let u = &position.spec.underlying;
    Ok(PanelRecordContext {
        underlying: u.clone(),
        eq_bucket: universe.portfolio.bucket(u).context("underlying without bucket")?,
        ir_bucket: 1,
        spot,
        vol: universe.market.equity(u)?.vol,
        maturity_days: (position.spec.maturity - time) * 365.0,
        rate_tenors: rate_tenors.to_vec(),
        quantity: position.quantity,
    })
}

/// Closed-form panel of a vanilla at one scenario, with zero rhos on the
/// market curve nodes.
fn vanilla_panel(
    universe: &Universe,
    position: &Position,
    state: &MarketState,
    spot: f64,
    tenors: &[f64],
    index: usize,
) -> Result<SensitivityPanel> {
    let zeros = universe.hw.zero_curve(state.time, state.short_rate, tenors)?;
    let curve = ForwardCurve::from_zero_rates(tenors.to_vec(), &zeros)?;
    let vol = universe.market.equity(&position.spec.underlying)?.vol;
    let cf = closed_form(&position.spec, spot, vol, &curve, state.time)?;
    Ok(SensitivityPanel {
        scenario_index: index,
        price: cf.price,
        delta: cf.delta,
        vega: cf.vega,
        rho_zero: forward_to_zero_rho(&cf.rho_fwd, tenors)?,
        rho_fwd: cf.rho_fwd,
        paths_used: 0,
    })
}

struct Book<'a> {
    universe: &'a Universe,
    cross: &'a CrossSection,
    params: SimmParams,
    /// Stock path per underlying id.
    spots: Vec<(String, Vec<f64>)>,
    market_tenors: Vec<f64>,
    asian_tenors: Vec<f64>,
    barrier_tenors: Vec<f64>,
}

impl Book<'_> {
    fn spot(&self, id: &str, i: usize) -> Result<f64> {
        let (_, s) = self.spots.iter().find(|(u, _)| u == id).context("unknown underlying")?;
        Ok(s[i])
    }

    /// Records per position at scenario `i`, exotics taken from the panels given.
    fn records(
        &self,
        i: usize,
        asian: (&str, &SensitivityPanel),
        barrier: (&str, &SensitivityPanel),
    ) -> Result<Vec<Vec<SensitivityRecord>>> {
        let state = &self.cross.states[i];
        self.universe
            .portfolio
            .positions
            .iter()
            .map(|pos| {
                let spot = self.spot(&pos.spec.underlying, i)?;
                let (panel, tenors) = if pos.label == asian.0 {
                    (asian.1.clone(), &self.asian_tenors)
                } else if pos.label == barrier.0 {
                    (barrier.1.clone(), &self.barrier_tenors)
                } else {
                    let p = vanilla_panel(self.universe, pos, state, spot, &self.market_tenors, i)?;
                    (p, &self.market_tenors)
                };
                let ctx = record_context(self.universe, pos, spot, state.time, tenors)?;
                Ok(panel_records(&panel, &ctx, &self.params)?)
            })
            .collect()
    }

    fn simm(&self, asian_label: &str, asian: &[SensitivityPanel], barrier_label: &str, barrier: &[SensitivityPanel]) -> Result<Vec<f64>> {
        (0..self.cross.len())
            .into_par_iter()
            .map(|i| {
                let recs = self.records(i, (asian_label, &asian[i]), (barrier_label, &barrier[i]))?;
                let flat: Vec<SensitivityRecord> = recs.into_iter().flatten().collect();
                Ok(compute_simm(&flat, &self.params)?.total)
            })
            .collect()
    }
}

pub(crate) fn run(
    config: &ExperimentConfig,
    universe: &Universe,
    cache: &BenchmarkCache,
    bundle: &mut Bundle,
) -> Result<Outcome> {
    let c = config.portfolio_simm.as_ref().context("missing [portfolio_simm] table")?;
    let params = match &c.simm_params {
        Some(path) => SimmParams::from_toml_str(&std::fs::read_to_string(path)?)?,
        None => SimmParams::illustrative(),
    };
    let asian_pos = universe.instrument(&c.asian_instrument, InstrumentKind::AsianArith)?;
    let barrier_pos = universe.instrument(&c.barrier_instrument, InstrumentKind::BarrierUpOut)?;
    let (asian, barrier) = (&asian_pos.spec, &barrier_pos.spec);
    anyhow::ensure!(
        asian.underlying == barrier.underlying,
        "both exotics must share one underlying to ride on one outer simulation"
    );
    let primary = asian.underlying.clone();
    let smoothing = universe.smoothing(barrier, &c.smoothing)?;
    let gbm = universe.gbm(&primary)?;
    let outer = universe.portfolio_outer(&primary, Some(&smoothing))?;
    let cross = universe.cross_section(config, &outer)?;
    let scenarios = cross.indexed();
    let stocks = cross.stocks();

    let mut spots = vec![(primary.clone(), stocks.clone())];
    let secondary_ids = universe.portfolio.underlyings.iter().map(|u| &u.id).filter(|id| **id != primary);
    for (id, s) in secondary_ids.zip(&cross.secondary) {
        spots.push((id.clone(), s.clone()));
    }
    let book = Book {
        universe,
        cross: &cross,
        params: params.clone(),
        spots,
        market_tenors: universe.market.curve_tenors(),
        asian_tenors: day_tenors(&c.asian_rho_days),
        barrier_tenors: day_tenors(&c.barrier_rho_days),
    };

    let (asian_bench, t_asian) = benchmark(
        universe,
        cache,
        "asian",
        &gbm,
        asian,
        &book.asian_tenors,
        None,
        Method::Adjoint,
        &scenarios,
        config.benchmark_paths,
        config.benchmark_seed,
    )?;
    let (barrier_bench, t_barrier) = benchmark(
        universe,
        cache,
        "barrier-smoothed",
        &gbm,
        barrier,
        &book.barrier_tenors,
        Some(&smoothing),
        Method::Adjoint,
        &scenarios,
        config.benchmark_paths,
        config.benchmark_seed,
    )?;
    let zero_cols = |days: &[f64]| -> Vec<(String, Quantity)> {
        days.iter()
            .enumerate()
            .map(|(k, d)| (format!("rho_zero_{d}d"), Quantity::RhoZero(k)))
            .collect()
    };
    let asian_rhos = zero_cols(&c.asian_rho_days);
    let barrier_rhos = zero_cols(&c.barrier_rho_days);
    bundle.panels("panels_asian_benchmark.csv", &stocks, &cross.factor, &asian_bench, &asian_rhos)?;
    bundle.panels("panels_barrier_benchmark.csv", &stocks, &cross.factor, &barrier_bench, &barrier_rhos)?;

    let (al, bl) = (c.asian_instrument.as_str(), c.barrier_instrument.as_str());
    let bench_simm = book.simm(al, &asian_bench, bl, &barrier_bench)?;
    let first = book.records(0, (al, &asian_bench[0]), (bl, &barrier_bench[0]))?;
    let flat: Vec<SensitivityRecord> = first.into_iter().flatten().collect();
    bundle.write("crif_benchmark_scenario0.csv", |w| Ok(write_records_csv(w, &flat)?))?;

    let exotic_idx: Vec<usize> = universe
        .portfolio
        .positions
        .iter()
        .enumerate()
        .filter(|(_, p)| p.label == al || p.label == bl)
        .map(|(i, _)| i)
        .collect();
    let marginal: Vec<f64> = (0..cross.len())
        .into_par_iter()
        .map(|i| {
            let recs = book.records(i, (al, &asian_bench[i]), (bl, &barrier_bench[i]))?;
            Ok(marginal_simm(&recs, &exotic_idx, &params)?)
        })
        .collect::<Result<_>>()?;

    let asian_ctx = universe.sweep_context(&gbm, asian, &book.asian_tenors, None);
    let barrier_ctx = universe.sweep_context(&gbm, barrier, &book.barrier_tenors, Some(&smoothing));
    let basis = BasisSpec::quadratic_with_cross("S", "P");
    let explanatory = [stocks.clone(), cross.factor.clone()];
    let tps = ThinnedTps::build(&cross.coords(), &cross.standardized_coords()?, c.thinning, c.n_lambda)?;
    let subset = cross.subset(&tps.indices);
    let band = 100.0 * c.error_band;
    let alpha = config.gate.ks_alpha;

    let mut seeds = Vec::new();
    let mut ks = Vec::new();
    let mut band_ok = Vec::new();
    let mut ks_ok = Vec::new();
    let mut lsmc_first = Vec::new();
    for (si, &seed) in config.seeds.iter().enumerate() {
        log::info!("portfolio seed {seed}");
        let crude = panel_sweep(&asian_ctx, &scenarios, Method::Adjoint, c.asian_paths, GeneratorKind::PseudoRandom, seed)?;
        let asian_lsmc = smooth_panels(&crude, &basis, &explanatory, &book.asian_tenors)?;
        let crude = panel_sweep(&barrier_ctx, &subset, Method::Adjoint, c.barrier_paths, GeneratorKind::PseudoRandom, seed)?;
        let barrier_lsmc = tps.smooth(&crude, &book.barrier_tenors)?;
        let simm = book.simm(al, &asian_lsmc, bl, &barrier_lsmc)?;
        let hist = relative_error_histogram(&bench_simm, &simm, HistogramBins::default())?;
        let test = ks_two_sample(&bench_simm, &simm)?;
        let within = hist.fraction_within(-band, band);
        band_ok.push(within >= c.band_fraction);
        ks_ok.push(test.p_value >= alpha);
        seeds.push(SeedResult {
            seed,
            fraction_within_band: within,
            min_error_pct: hist.min,
            max_error_pct: hist.max,
            ks_d_statistic: test.d_statistic,
            ks_p_value: test.p_value,
        });
        ks.push(KsRow {
            method: "lsmc".into(),
            seed,
            paths: c.asian_paths,
            sensitivity: "simm".into(),
            d_statistic: test.d_statistic,
            p_value: test.p_value,
            passed: test.p_value >= alpha,
        });
        if si == 0 {
            bundle.panels("panels_asian_lsmc.csv", &stocks, &cross.factor, &asian_lsmc, &asian_rhos)?;
            bundle.panels("panels_barrier_lsmc.csv", &stocks, &cross.factor, &barrier_lsmc, &barrier_rhos)?;
            bundle.write("simm_error_histogram.csv", |w| Ok(hist.write_csv(w)?))?;
            let qq = qq_points(&bench_simm, &simm, config.qq_levels)?;
            bundle.write("qq_simm.csv", |w| Ok(qq.write_csv(w)?))?;
            lsmc_first = simm;
        }
    }

    let mut header: Vec<String> = vec!["scenario".into()];
    let mut cols: Vec<Vec<f64>> = vec![(0..cross.len()).map(|i| i as f64).collect()];
    for (id, s) in &book.spots {
        header.push(format!("stock_{id}"));
        cols.push(s.clone());
    }
    header.extend(["factor", "benchmark_simm", "lsmc_simm", "exotic_share"].map(String::from));
    cols.extend([cross.factor.clone(), bench_simm.clone(), lsmc_first, marginal.clone()]);
    bundle.columns("simm_scenarios.csv", &header, &cols)?;
    bundle.records("ks_table.csv", &ks)?;

    let report = SimmReport {
        params_version: params.version.clone(),
        psi_ir_eq: params.psi(lsmc_core::simm::RiskClass::InterestRate, lsmc_core::simm::RiskClass::Equity)?,
        scenarios: cross.len(),
        error_band_pct: band,
        benchmark_simm: Distribution::of(&bench_simm),
        seeds,
        marginal_simm: MarginalReport {
            positions: vec![al.to_string(), bl.to_string()],
            share: Distribution::of(&marginal),
        },
    };
    bundle.json("simm_report.json", &report)?;
    bundle.json(
        "speedup.json",
        &SpeedupFile {
            asian: SpeedupReport::new(config.benchmark_paths, c.asian_paths, cross.len(), cross.len())?,
            barrier: SpeedupReport::new(config.benchmark_paths, c.barrier_paths, cross.len(), tps.indices.len())?,
        },
    )?;

    let required = config.required_seeds();
    let gates = vec![
        seed_gate(
            "portfolio_simm_error_band",
            &band_ok,
            required,
            &format!("keep {:.0}% of SIMM errors within ±{band}%", 100.0 * c.band_fraction),
        ),
        seed_gate("portfolio_simm_ks", &ks_ok, required, "pass KS on the SIMM distribution"),
    ];
    Ok(Outcome {
        gates,
        timings: vec![("asian".into(), t_asian), ("barrier-smoothed".into(), t_barrier)],
    })
}
