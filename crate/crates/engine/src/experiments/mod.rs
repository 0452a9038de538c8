//! The four experiments and the dispatcher that runs one from a config.

mod asian;
mod barrier;
mod instability;
mod portfolio;

use std::path::PathBuf;

use anyhow::Result;
use lsmc_core::instruments::{InstrumentSpec, SmoothingParams};
use lsmc_core::scenario::{GbmParams, GeneratorKind, Hw1fParams, MarketState};
use lsmc_core::sensitivity::{panel_sweep, Method, SensitivityPanel};
use serde::{Deserialize, Serialize};

use crate::cache::{BenchmarkCache, StageTiming};
use crate::config::{ExperimentConfig, ExperimentKind, RunOptions};
use crate::report::{Bundle, Gate};
use crate::setup::Universe;

/// Outcome of one `run_experiment` call.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    pub gates: Vec<Gate>,
    pub files: Vec<PathBuf>,
    /// Benchmark stages by name; kept out of the written bundle.
    pub benchmark_timings: Vec<(String, StageTiming)>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Summary {
    experiment: ExperimentKind,
    passed: bool,
    gates: Vec<Gate>,
}

/// What an experiment hands back to the dispatcher.
#[derive(Debug, Default)]
pub(crate) struct Outcome {
    pub gates: Vec<Gate>,
    pub timings: Vec<(String, StageTiming)>,
}

/// Validates, runs and writes the bundle of one experiment. The options are
/// applied to `config` first; `--threads` bounds scenario-level parallelism.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunReport> {
    let mut config = config.clone();
    config.apply(options);
    config.validate()?;
    match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| run_validated(&config)),
        None => run_validated(&config),
    }
}

fn run_validated(config: &ExperimentConfig) -> Result<RunReport> {
    let universe = Universe::load(config)?;
    let cache = BenchmarkCache::new(&config.cache_dir);
    let mut bundle = Bundle::create(&config.output_dir)?;
    log::info!("running {} into {}", config.experiment, config.output_dir.display());
    let outcome = match config.experiment {
        ExperimentKind::AsianSensitivities => asian::run(config, &universe, &cache, &mut bundle)?,
        ExperimentKind::BarrierSensitivities => barrier::run(config, &universe, &cache, &mut bundle)?,
        ExperimentKind::PortfolioSimm => portfolio::run(config, &universe, &cache, &mut bundle)?,
        ExperimentKind::InstabilityDemo => instability::run(config, &universe, &mut bundle)?,
    };
    let summary = Summary {
        experiment: config.experiment,
        passed: outcome.gates.iter().all(|g| g.passed),
        gates: outcome.gates.clone(),
    };
    bundle.json("summary.json", &summary)?;
    Ok(RunReport {
        experiment: config.experiment,
        output_dir: config.output_dir.clone(),
        gates: outcome.gates,
        files: bundle.into_files(),
        benchmark_timings: outcome.timings,
    })
}

/// Everything that determines a benchmark sweep.
#[derive(Serialize)]
struct BenchmarkKey<'a> {
    version: u32,
    gbm: &'a GbmParams,
    hw: &'a Hw1fParams,
    rate_corr: f64,
    curve_nodes: &'a [f64],
    spec: &'a InstrumentSpec,
    smoothing: Option<&'a SmoothingParams>,
    method: Method,
    paths: usize,
    seed: u64,
    scenarios: &'a [(usize, MarketState)],
}

/// Sobol benchmark panels, loaded from the cache when available.
#[allow(clippy::too_many_arguments)]
pub(crate) fn benchmark(
    universe: &Universe,
    cache: &BenchmarkCache,
    name: &str,
    gbm: &GbmParams,
    spec: &InstrumentSpec,
    curve_nodes: &[f64],
    smoothing: Option<&SmoothingParams>,
    method: Method,
    scenarios: &[(usize, MarketState)],
    paths: usize,
    seed: u64,
) -> Result<(Vec<SensitivityPanel>, StageTiming)> {
    let ctx = universe.sweep_context(gbm, spec, curve_nodes, smoothing);
    let key = BenchmarkKey {
        version: 1,
        gbm,
        hw: &universe.hw_params,
        rate_corr: ctx.rate_corr,
        curve_nodes,
        spec,
        smoothing,
        method,
        paths,
        seed,
        scenarios,
    };
    cache.panels(name, &key, || {
        Ok(panel_sweep(&ctx, scenarios, method, paths, GeneratorKind::Sobol, seed)?)
    })
}

/// Seeds whose per-seed check passed, against the required count.
pub(crate) fn seed_gate(name: &str, passing: &[bool], required: usize, what: &str) -> Gate {
    let n = passing.iter().filter(|&&b| b).count();
    Gate::new(
        name,
        n >= required,
        format!("{n} of {} seeds {what} (required {required})", passing.len()),
    )
}
