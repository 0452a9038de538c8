//! Asian option: polynomial LSMC over a ladder of inner path counts, checked
//! against a Sobol benchmark with KS tests, plus the price fit at few paths.

use anyhow::{Context, Result};
use lsmc_core::instruments::InstrumentKind;
use lsmc_core::regression::{smooth_panels, BasisSpec};
use lsmc_core::scenario::GeneratorKind;
use lsmc_core::sensitivity::{panel_sweep, Method, SensitivityPanel};
use lsmc_core::stats::qq_points;
use serde::Serialize;

use super::{benchmark, seed_gate, Outcome};
use crate::cache::BenchmarkCache;
use crate::config::ExperimentConfig;
use crate::report::{ks_rows, r_squared, Bundle, Gate, KsRow, Quantity, SpeedupReport};
use crate::setup::{day_tenors, rho_labels, Universe};

#[derive(Debug, Serialize)]
struct FitRow {
    seed: u64,
    paths: usize,
    r_squared: f64,
}

#[derive(Debug, Serialize)]
struct SpeedupFile {
    /// Smallest ladder step from which every larger step meets the seed rule.
    speedup: Option<SpeedupReport>,
    explained_variance_first_factor: f64,
}

pub(crate) fn run(
    config: &ExperimentConfig,
    universe: &Universe,
    cache: &BenchmarkCache,
    bundle: &mut Bundle,
) -> Result<Outcome> {
    let c = config.asian.as_ref().context("missing [asian] table")?;
    let spec = universe.instrument(&c.instrument, InstrumentKind::AsianArith)?.spec.clone();
    let gbm = universe.gbm(&spec.underlying)?;
    let outer = universe.portfolio_outer(&spec.underlying, None)?;
    let cross = universe.cross_section(config, &outer)?;
    let scenarios = cross.indexed();
    let nodes = day_tenors(&c.rho_tenor_days);
    let labels = rho_labels(&c.rho_tenor_days);
    let rhos: Vec<(String, Quantity)> = labels
        .iter()
        .enumerate()
        .map(|(k, l)| (format!("rho_{l}"), Quantity::RhoZero(k)))
        .collect();
    let mut sens = vec![("delta".to_string(), Quantity::Delta), ("vega".to_string(), Quantity::Vega)];
    sens.extend(rhos.iter().cloned());

    let (bench, timing) = benchmark(
        universe,
        cache,
        "asian",
        &gbm,
        &spec,
        &nodes,
        None,
        Method::Adjoint,
        &scenarios,
        config.benchmark_paths,
        config.benchmark_seed,
    )?;
    let stocks = cross.stocks();
    bundle.panels("panels_benchmark.csv", &stocks, &cross.factor, &bench, &rhos)?;

    let ctx = universe.sweep_context(&gbm, &spec, &nodes, None);
    let basis = BasisSpec::quadratic_with_cross("S", "P");
    let explanatory = [stocks.clone(), cross.factor.clone()];
    let smooth = |crude: &[SensitivityPanel]| smooth_panels(crude, &basis, &explanatory, &nodes);

    // The basis fitted to the benchmark itself: KS failures here are basis
    // bias, not Monte Carlo noise.
    let oracle = smooth(&bench)?;
    let mut ks: Vec<KsRow> = ks_rows("basis_oracle", config.benchmark_seed, config.benchmark_paths, &sens, &bench, &oracle, config.gate.ks_alpha)?;

    let mut steps: Vec<usize> = c.ladder.iter().chain(&c.fit_paths).copied().collect();
    steps.sort_unstable();
    steps.dedup();

    let alpha = config.gate.ks_alpha;
    let mut fits: Vec<FitRow> = Vec::new();
    let bench_price = Quantity::Price.extract(&bench);
    for (si, &seed) in config.seeds.iter().enumerate() {
        log::info!("asian seed {seed}");
        for &p in &steps {
            let crude = panel_sweep(&ctx, &scenarios, Method::Adjoint, p, GeneratorKind::PseudoRandom, seed)?;
            let lsmc = smooth(&crude)?;
            if c.ladder.contains(&p) {
                ks.extend(ks_rows("lsmc_poly", seed, p, &sens, &bench, &lsmc, alpha)?);
                if si == 0 {
                    bundle.panels(&format!("panels_lsmc_p{p}.csv"), &stocks, &cross.factor, &lsmc, &rhos)?;
                    bundle.panels(&format!("panels_crude_p{p}.csv"), &stocks, &cross.factor, &crude, &rhos)?;
                    for (name, q) in &sens {
                        let qq = qq_points(&q.extract(&bench), &q.extract(&lsmc), config.qq_levels)?;
                        bundle.write(&format!("qq_{name}_p{p}.csv"), |w| Ok(qq.write_csv(w)?))?;
                    }
                }
            }
            if c.fit_paths.contains(&p) {
                let price = Quantity::Price.extract(&lsmc);
                fits.push(FitRow {
                    seed,
                    paths: p,
                    r_squared: r_squared(&bench_price, &price),
                });
                if si == 0 && p == c.fit_gate_paths {
                    let header: Vec<String> = ["scenario", "stock", "factor", "benchmark", "crude", "lsmc"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect();
                    let cols = vec![
                        (0..stocks.len()).map(|i| i as f64).collect(),
                        stocks.clone(),
                        cross.factor.clone(),
                        bench_price.clone(),
                        Quantity::Price.extract(&crude),
                        price,
                    ];
                    bundle.columns(&format!("fit_prices_p{p}.csv"), &header, &cols)?;
                }
            }
        }
    }
    bundle.records("ks_table.csv", &ks)?;
    bundle.records("fit_r2.csv", &fits)?;

    let required = config.required_seeds();
    let seed_ok = |p: usize, seed: u64| {
        ks.iter().filter(|r| r.method == "lsmc_poly" && r.paths == p && r.seed == seed && r.passed).count() >= c.gate_min_passing
    };
    let step_ok = |p: usize| config.seeds.iter().filter(|&&s| seed_ok(p, s)).count() >= required;

    let mut gates = Vec::new();
    for &p in c.ladder.iter().filter(|&&p| p >= c.gate_min_paths) {
        let passing: Vec<bool> = config.seeds.iter().map(|&s| seed_ok(p, s)).collect();
        gates.push(seed_gate(
            &format!("asian_ks_p{p}"),
            &passing,
            required,
            &format!("pass KS for at least {} of {} sensitivities", c.gate_min_passing, sens.len()),
        ));
    }
    let fit: Vec<&FitRow> = fits.iter().filter(|f| f.paths == c.fit_gate_paths).collect();
    let worst = fit.iter().map(|f| f.r_squared).fold(f64::INFINITY, f64::min);
    gates.push(Gate::new(
        "asian_price_fit",
        worst >= c.fit_gate_r2,
        format!(
            "minimum R² over seeds at {} paths is {worst:.6} (required {})",
            c.fit_gate_paths, c.fit_gate_r2
        ),
    ));

    let q = c
        .ladder
        .iter()
        .enumerate()
        .find(|&(i, _)| c.ladder[i..].iter().all(|&p| step_ok(p)))
        .map(|(_, &p)| p);
    let speedup = q
        .map(|q| SpeedupReport::new(c.fmc_reference_paths, q, cross.len(), cross.len()))
        .transpose()?;
    bundle.json(
        "speedup.json",
        &SpeedupFile {
            speedup,
            explained_variance_first_factor: cross.explained_variance,
        },
    )?;
    Ok(Outcome {
        gates,
        timings: vec![("asian".to_string(), timing)],
    })
}
