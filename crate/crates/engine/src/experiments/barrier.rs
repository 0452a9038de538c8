//! Barrier option: thin the scenarios, fit a thin plate spline to crude
//! adjoint panels of the smoothed payoff and test it against a Sobol
//! benchmark; run hard-payoff finite differences as the FMC comparison.

use anyhow::{Context, Result};
use lsmc_core::instruments::InstrumentKind;
use lsmc_core::scenario::GeneratorKind;
use lsmc_core::sensitivity::{panel_sweep, BumpSpec, Method, SensitivityPanel};
use lsmc_core::stats::qq_points;
use lsmc_core::tps::{thin_scenarios, TpsEvaluator, TpsModel};

use super::{benchmark, seed_gate, Outcome};
use crate::cache::BenchmarkCache;
use crate::config::ExperimentConfig;
use crate::report::{ks_rows, Bundle, KsRow, Quantity, SpeedupReport};
use crate::setup::{day_tenors, Universe};

/// Thinned centres with the spline machinery built on them.
pub(crate) struct ThinnedTps {
    pub indices: Vec<usize>,
    pub model: TpsModel,
    pub evaluator: TpsEvaluator,
}

impl ThinnedTps {
    /// Thins `(S, P)` in standardized coordinates to `m` points and prepares
    /// a spline with penalty `n_lambda / m` evaluated at every scenario.
    pub fn build(coords: &[(f64, f64)], standardized: &[(f64, f64)], m: usize, n_lambda: f64) -> Result<Self> {
        let thinned = thin_scenarios(standardized, m)?;
        let centers: Vec<(f64, f64)> = thinned.indices.iter().map(|&i| coords[i]).collect();
        let model = TpsModel::precompute(&centers, n_lambda / m as f64)?;
        let evaluator = model.evaluator(coords);
        Ok(Self {
            indices: thinned.indices,
            model,
            evaluator,
        })
    }

    /// Fits every panel column at the centres and evaluates it everywhere.
    pub fn smooth(&self, crude: &[SensitivityPanel], tenors: &[f64]) -> Result<Vec<SensitivityPanel>> {
        let width = crude.first().map_or(0, |p| p.values().len());
        let rows: Vec<Vec<f64>> = crude.iter().map(SensitivityPanel::values).collect();
        let mut columns = Vec::with_capacity(width);
        for c in 0..width {
            let f: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            columns.push(self.evaluator.evaluate(&self.model.fit(&f)?));
        }
        let paths = crude.first().map_or(0, |p| p.paths_used);
        let n = columns.first().map_or(0, Vec::len);
        (0..n)
            .map(|i| {
                let row: Vec<f64> = columns.iter().map(|col| col[i]).collect();
                Ok(SensitivityPanel::from_values(i, &row, tenors, paths)?)
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
    let c = config.barrier.as_ref().context("missing [barrier] table")?;
    let spec = universe.instrument(&c.instrument, InstrumentKind::BarrierUpOut)?.spec.clone();
    let smoothing = universe.smoothing(&spec, &c.smoothing)?;
    let gbm = universe.gbm(&spec.underlying)?;
    let outer = universe.portfolio_outer(&spec.underlying, Some(&smoothing))?;
    let cross = universe.cross_section(config, &outer)?;
    let scenarios = cross.indexed();
    let node_days: Vec<f64> = c.rho_tenor_days.iter().copied().chain(c.tail_days).collect();
    let nodes = day_tenors(&node_days);
    let stocks = cross.stocks();

    let mut fwd: Vec<(String, Quantity)> = node_days
        .iter()
        .enumerate()
        .map(|(k, d)| (format!("rho_fwd_{d}d"), Quantity::RhoFwd(k)))
        .collect();
    let mut zero: Vec<(String, Quantity)> = c
        .zero_rho_days
        .iter()
        .map(|d| {
            let k = c.rho_tenor_days.iter().position(|x| x == d).unwrap_or_default();
            (format!("rho_zero_{d}d"), Quantity::RhoZero(k))
        })
        .collect();
    // Ungated columns: the tail bucket and the zero rhos.
    let tail = fwd.split_off(c.rho_tenor_days.len());
    let mut gated = vec![("delta".to_string(), Quantity::Delta), ("vega".to_string(), Quantity::Vega)];
    gated.extend(fwd.iter().cloned());
    let equity = [("delta".to_string(), Quantity::Delta), ("vega".to_string(), Quantity::Vega)];
    let mut all_rhos = fwd.clone();
    all_rhos.extend(tail.iter().cloned());
    all_rhos.extend(zero.iter().cloned());
    zero.splice(0..0, tail);

    let (bench, t_smooth) = benchmark(
        universe,
        cache,
        "barrier-smoothed",
        &gbm,
        &spec,
        &nodes,
        Some(&smoothing),
        Method::Adjoint,
        &scenarios,
        config.benchmark_paths,
        config.benchmark_seed,
    )?;
    bundle.panels("panels_benchmark.csv", &stocks, &cross.factor, &bench, &all_rhos)?;

    let tps = ThinnedTps::build(&cross.coords(), &cross.standardized_coords()?, c.thinning, c.n_lambda)?;
    let subset = cross.subset(&tps.indices);
    bundle.columns(
        "thinned.csv",
        &["scenario".into(), "stock".into(), "factor".into()],
        &[
            tps.indices.iter().map(|&i| i as f64).collect(),
            tps.indices.iter().map(|&i| stocks[i]).collect(),
            tps.indices.iter().map(|&i| cross.factor[i]).collect(),
        ],
    )?;

    let fd = Method::FiniteDifferenceEquity(BumpSpec::default());
    let (hard_bench, t_hard) = benchmark(
        universe,
        cache,
        "barrier-hard",
        &gbm,
        &spec,
        &nodes,
        None,
        fd,
        &subset,
        config.benchmark_paths,
        config.benchmark_seed,
    )?;
    bundle.panels("panels_hard_benchmark.csv", &stocks, &cross.factor, &hard_bench, &[])?;

    let smooth_ctx = universe.sweep_context(&gbm, &spec, &nodes, Some(&smoothing));
    let hard_ctx = universe.sweep_context(&gbm, &spec, &nodes, None);
    let alpha = config.gate.ks_alpha;
    let mut ks: Vec<KsRow> = Vec::new();
    let mut lsmc_pass = Vec::new();
    let mut fmc_vega_fail = Vec::new();
    for (si, &seed) in config.seeds.iter().enumerate() {
        log::info!("barrier seed {seed}");
        let crude = panel_sweep(&smooth_ctx, &subset, Method::Adjoint, c.lsmc_paths, GeneratorKind::PseudoRandom, seed)?;
        let lsmc = tps.smooth(&crude, &nodes)?;
        let rows = ks_rows("lsmc_tps", seed, c.lsmc_paths, &gated, &bench, &lsmc, alpha)?;
        let equity_ok = rows[..2].iter().all(|r| r.passed);
        let rho_ok = rows[2..].iter().filter(|r| r.passed).count() >= c.gate_min_rho_passing;
        lsmc_pass.push(equity_ok && rho_ok);
        ks.extend(rows);
        ks.extend(ks_rows("lsmc_tps", seed, c.lsmc_paths, &zero, &bench, &lsmc, alpha)?);

        let fmc = panel_sweep(&hard_ctx, &subset, fd, c.fmc_paths, GeneratorKind::PseudoRandom, seed)?;
        let rows = ks_rows("fmc_fd", seed, c.fmc_paths, &equity, &hard_bench, &fmc, alpha)?;
        fmc_vega_fail.push(!rows[1].passed);
        ks.extend(rows);

        if si == 0 {
            bundle.panels("panels_lsmc.csv", &stocks, &cross.factor, &lsmc, &all_rhos)?;
            bundle.panels("panels_crude.csv", &stocks, &cross.factor, &crude, &all_rhos)?;
            bundle.panels("panels_fmc.csv", &stocks, &cross.factor, &fmc, &[])?;
            for (name, q) in &gated {
                let qq = qq_points(&q.extract(&bench), &q.extract(&lsmc), config.qq_levels)?;
                bundle.write(&format!("qq_lsmc_{name}.csv"), |w| Ok(qq.write_csv(w)?))?;
            }
            for (name, q) in &equity {
                let qq = qq_points(&q.extract(&hard_bench), &q.extract(&fmc), config.qq_levels)?;
                bundle.write(&format!("qq_fmc_{name}.csv"), |w| Ok(qq.write_csv(w)?))?;
            }
        }
    }
    bundle.records("ks_table.csv", &ks)?;
    let speedup = SpeedupReport::new(c.fmc_reference_paths, c.lsmc_paths, cross.len(), tps.indices.len())?;
    bundle.json("speedup.json", &speedup)?;

    let required = config.required_seeds();
    let gates = vec![
        seed_gate(
            "barrier_lsmc_ks",
            &lsmc_pass,
            required,
            &format!(
                "pass KS for delta, vega and at least {} of {} forward rhos",
                c.gate_min_rho_passing,
                fwd.len()
            ),
        ),
        seed_gate("barrier_fmc_vega_rejected", &fmc_vega_fail, required, "reject FMC vega"),
    ];
    Ok(Outcome {
        gates,
        timings: vec![("barrier-smoothed".into(), t_smooth), ("barrier-hard".into(), t_hard)],
    })
}
