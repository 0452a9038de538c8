//! Experiment configuration: a TOML file with shared settings at the top level
//! and one table per experiment kind.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AsianSensitivities,
    BarrierSensitivities,
    PortfolioSimm,
    InstabilityDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    FmcFd,
    FmcAdjoint,
    LsmcPoly,
    LsmcTps,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AsianSensitivities => "asian_sensitivities",
            Self::BarrierSensitivities => "barrier_sensitivities",
            Self::PortfolioSimm => "portfolio_simm",
            Self::InstabilityDemo => "instability_demo",
        })
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FmcFd => "fmc_fd",
            Self::FmcAdjoint => "fmc_adjoint",
            Self::LsmcPoly => "lsmc_poly",
            Self::LsmcTps => "lsmc_tps",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    #[serde(default = "default_alpha")]
    pub ks_alpha: f64,
    /// Fraction of seeds that must pass a per-seed gate.
    #[serde(default = "default_seed_fraction")]
    pub seed_pass_fraction: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            ks_alpha: default_alpha(),
            seed_pass_fraction: default_seed_fraction(),
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_seed_fraction() -> f64 {
    0.8
}

fn default_qq_levels() -> usize {
    101
}

fn default_time_days() -> f64 {
    14.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsianConfig {
    /// Portfolio position label of the Asian option.
    pub instrument: String,
    pub ladder: Vec<usize>,
    /// Zero-rate rho nodes in days after the scenario date.
    pub rho_tenor_days: Vec<f64>,
    /// Ladder steps at or above this path count are gated.
    pub gate_min_paths: usize,
    /// Sensitivities (of delta, vega and the rhos) that must pass per seed.
    pub gate_min_passing: usize,
    /// Inner path counts whose LSMC price fit is reported.
    pub fit_paths: Vec<usize>,
    pub fit_gate_paths: usize,
    pub fit_gate_r2: f64,
    /// FMC path count used for the speedup report.
    pub fmc_reference_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub eps1: f64,
    pub eps2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub instrument: String,
    pub lsmc_paths: usize,
    pub thinning: usize,
    /// Product `n·λ` of the thinned count and the TPS penalty.
    pub n_lambda: f64,
    pub smoothing: SmoothingConfig,
    /// Forward-rate bucket boundaries in days after the scenario date.
    pub rho_tenor_days: Vec<f64>,
    /// Extra curve node closing the last gated bucket; the period up to it
    /// is reported but not gated. Without it the last bucket is open-ended.
    #[serde(default)]
    pub tail_days: Option<f64>,
    /// Forward rhos that must pass per seed.
    pub gate_min_rho_passing: usize,
    /// Hard-payoff finite-difference path count per scenario.
    pub fmc_paths: usize,
    /// FMC path count used for the speedup report.
    pub fmc_reference_paths: usize,
    /// Zero-rate nodes (days) reported alongside the forward rhos.
    #[serde(default)]
    pub zero_rho_days: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioConfig {
    pub asian_instrument: String,
    pub barrier_instrument: String,
    pub asian_paths: usize,
    pub barrier_paths: usize,
    pub thinning: usize,
    pub n_lambda: f64,
    pub smoothing: SmoothingConfig,
    pub asian_rho_days: Vec<f64>,
    pub barrier_rho_days: Vec<f64>,
    /// Half-width of the relative error band.
    pub error_band: f64,
    /// Fraction of scenarios whose SIMM error must fall inside the band.
    pub band_fraction: f64,
    /// SIMM parameter file; the shipped illustrative set when absent.
    #[serde(default)]
    pub simm_params: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstabilityConfig {
    pub instrument: String,
    pub paths: Vec<usize>,
    pub paper_paths: Vec<usize>,
    pub stock_points: usize,
    pub rate_points: usize,
    /// Grid spans these quantiles of the simulated stock and short rate.
    pub quantile_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub method: MethodKind,
    pub market: PathBuf,
    pub portfolio: PathBuf,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub scenarios: usize,
    pub scenario_seed: u64,
    #[serde(default = "default_time_days")]
    pub time_days: f64,
    pub seeds: Vec<u64>,
    pub benchmark_paths: usize,
    pub paper_benchmark_paths: usize,
    pub benchmark_seed: u64,
    #[serde(default = "default_qq_levels")]
    pub qq_levels: usize,
    #[serde(default)]
    pub gate: GateConfig,
    pub asian: Option<AsianConfig>,
    pub barrier: Option<BarrierConfig>,
    pub portfolio_simm: Option<PortfolioConfig>,
    pub instability: Option<InstabilityConfig>,
}

/// Command-line adjustments applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub paper_scale: bool,
    pub out: Option<PathBuf>,
    pub seed_override: Option<u64>,
}

impl ExperimentConfig {
    /// Reads `path`; relative file references resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = Self::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.market, &mut config.portfolio, &mut config.output_dir, &mut config.cache_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(PortfolioConfig { simm_params: Some(p), .. }) = config.portfolio_simm.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn apply(&mut self, options: &RunOptions) {
        if let Some(out) = &options.out {
            self.output_dir = out.clone();
        }
        if let Some(seed) = options.seed_override {
            self.seeds = vec![seed];
        }
        if options.paper_scale {
            self.benchmark_paths = self.paper_benchmark_paths;
            if let Some(c) = self.instability.as_mut() {
                c.paths = c.paper_paths.clone();
            }
        }
    }

    /// Seeds that must pass a per-seed gate.
    pub fn required_seeds(&self) -> usize {
        (self.gate.seed_pass_fraction * self.seeds.len() as f64 - 1e-9).ceil().max(1.0) as usize
    }

    /// Every problem with the configuration, including missing files.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                out.push(msg);
            }
        };
        for (name, p) in [("market", &self.market), ("portfolio", &self.portfolio)] {
            check(p.is_file(), format!("{name} file {} does not exist", p.display()));
        }
        check(self.scenarios >= 3, format!("scenarios must be at least 3, got {}", self.scenarios));
        check(self.time_days > 0.0, format!("time_days must be positive, got {}", self.time_days));
        check(!self.seeds.is_empty(), "seeds must list at least one explicit seed".into());
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        check(seeds.len() == self.seeds.len(), "seeds must be distinct".into());
        check(self.qq_levels >= 2, "qq_levels must be at least 2".into());
        check(
            self.paper_benchmark_paths >= self.benchmark_paths,
            "paper_benchmark_paths must be at least benchmark_paths".into(),
        );
        check(
            self.gate.ks_alpha > 0.0 && self.gate.ks_alpha < 1.0,
            format!("gate.ks_alpha must lie in (0, 1), got {}", self.gate.ks_alpha),
        );
        check(
            self.gate.seed_pass_fraction > 0.0 && self.gate.seed_pass_fraction <= 1.0,
            format!("gate.seed_pass_fraction must lie in (0, 1], got {}", self.gate.seed_pass_fraction),
        );
        let tenors_ok = |d: &[f64]| !d.is_empty() && d[0] > 0.0 && d.windows(2).all(|w| w[0] < w[1]);
        let (expected_method, section) = match self.experiment {
            ExperimentKind::AsianSensitivities => (MethodKind::LsmcPoly, self.asian.is_some()),
            ExperimentKind::BarrierSensitivities => (MethodKind::LsmcTps, self.barrier.is_some()),
            ExperimentKind::PortfolioSimm => (MethodKind::LsmcTps, self.portfolio_simm.is_some()),
            ExperimentKind::InstabilityDemo => (MethodKind::FmcFd, self.instability.is_some()),
        };
        check(
            self.method == expected_method,
            format!("method {} does not fit experiment {}; expected {expected_method}", self.method, self.experiment),
        );
        check(section, format!("experiment {} needs its settings table", self.experiment));
        let bench = self.benchmark_paths;
        match self.experiment {
            ExperimentKind::AsianSensitivities => {
                if let Some(c) = &self.asian {
                    check(!c.ladder.is_empty(), "asian.ladder is empty".into());
                    check(c.ladder.windows(2).all(|w| w[0] < w[1]), "asian.ladder must increase".into());
                    check(c.ladder.iter().all(|&p| p > 0), "asian.ladder entries must be positive".into());
                    let max = c.ladder.iter().chain(&c.fit_paths).copied().max().unwrap_or(0);
                    check(bench > max, format!("benchmark_paths {bench} must exceed the largest inner path count {max}"));
                    check(tenors_ok(&c.rho_tenor_days), "asian.rho_tenor_days must be positive and increasing".into());
                    check(
                        c.gate_min_passing <= 2 + c.rho_tenor_days.len(),
                        "asian.gate_min_passing exceeds the number of sensitivities".into(),
                    );
                    check(c.fit_paths.contains(&c.fit_gate_paths), "asian.fit_gate_paths must be one of fit_paths".into());
                    check(c.fit_paths.iter().all(|&p| p > 0), "asian.fit_paths entries must be positive".into());
                    check(c.fit_gate_r2 > 0.0 && c.fit_gate_r2 <= 1.0, "asian.fit_gate_r2 must lie in (0, 1]".into());
                    check(c.fmc_reference_paths > 0, "asian.fmc_reference_paths must be positive".into());
                }
            }
            ExperimentKind::BarrierSensitivities => {
                if let Some(c) = &self.barrier {
                    let max = c.lsmc_paths.max(c.fmc_paths);
                    check(bench > max, format!("benchmark_paths {bench} must exceed the largest inner path count {max}"));
                    check(c.lsmc_paths > 0 && c.fmc_paths > 0, "barrier path counts must be positive".into());
                    check(
                        c.thinning >= 3 && c.thinning <= self.scenarios,
                        format!("barrier.thinning must lie in [3, {}], got {}", self.scenarios, c.thinning),
                    );
                    check(c.n_lambda >= 0.0, "barrier.n_lambda must be non-negative".into());
                    check(c.smoothing.eps1 > 0.0 && c.smoothing.eps2 > 0.0, "smoothing constants must be positive".into());
                    check(tenors_ok(&c.rho_tenor_days), "barrier.rho_tenor_days must be positive and increasing".into());
                    if let (Some(tail), Some(last)) = (c.tail_days, c.rho_tenor_days.last()) {
                        check(tail > *last, format!("barrier.tail_days must exceed {last}, got {tail}"));
                    }
                    check(
                        c.gate_min_rho_passing <= c.rho_tenor_days.len(),
                        "barrier.gate_min_rho_passing exceeds the number of forward rhos".into(),
                    );
                    check(
                        c.zero_rho_days.iter().all(|d| c.rho_tenor_days.contains(d)),
                        "barrier.zero_rho_days must be a subset of rho_tenor_days".into(),
                    );
                    check(c.fmc_reference_paths > 0, "barrier.fmc_reference_paths must be positive".into());
                }
            }
            ExperimentKind::PortfolioSimm => {
                if let Some(c) = &self.portfolio_simm {
                    let max = c.asian_paths.max(c.barrier_paths);
                    check(bench > max, format!("benchmark_paths {bench} must exceed the largest inner path count {max}"));
                    check(c.asian_paths > 0 && c.barrier_paths > 0, "portfolio path counts must be positive".into());
                    check(
                        c.thinning >= 3 && c.thinning <= self.scenarios,
                        format!("portfolio_simm.thinning must lie in [3, {}], got {}", self.scenarios, c.thinning),
                    );
                    check(c.n_lambda >= 0.0, "portfolio_simm.n_lambda must be non-negative".into());
                    check(c.smoothing.eps1 > 0.0 && c.smoothing.eps2 > 0.0, "smoothing constants must be positive".into());
                    check(tenors_ok(&c.asian_rho_days), "portfolio_simm.asian_rho_days must be positive and increasing".into());
                    check(
                        tenors_ok(&c.barrier_rho_days),
                        "portfolio_simm.barrier_rho_days must be positive and increasing".into(),
                    );
                    check(c.error_band > 0.0, "portfolio_simm.error_band must be positive".into());
                    check(
                        c.band_fraction > 0.0 && c.band_fraction <= 1.0,
                        "portfolio_simm.band_fraction must lie in (0, 1]".into(),
                    );
                    if let Some(p) = &c.simm_params {
                        check(p.is_file(), format!("SIMM parameter file {} does not exist", p.display()));
                    }
                }
            }
            ExperimentKind::InstabilityDemo => {
                if let Some(c) = &self.instability {
                    check(c.paths.len() >= 2, "instability.paths needs at least two path counts".into());
                    check(c.paths.len() == c.paper_paths.len(), "instability.paper_paths must match paths in length".into());
                    check(c.paths.iter().chain(&c.paper_paths).all(|&p| p > 0), "instability path counts must be positive".into());
                    check(c.stock_points >= 2 && c.rate_points >= 2, "instability grid needs at least 2 points per axis".into());
                    let (lo, hi) = c.quantile_range;
                    check(0.0 <= lo && lo < hi && hi <= 1.0, "instability.quantile_range must satisfy 0 <= lo < hi <= 1".into());
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            return Ok(());
        }
        let list: Vec<String> = problems.iter().map(|p| format!("  - {p}")).collect();
        bail!("invalid configuration:\n{}", list.join("\n"))
    }
}
