//! Report bundle: CSV and JSON artifacts, KS rows, gates and speedup ratios.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lsmc_core::sensitivity::SensitivityPanel;
use lsmc_core::stats::{ks_two_sample, KsResult};
use serde::{Deserialize, Serialize};

/// A pass/fail check of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Gate {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// FMC path count `p` over LSMC path count `q`, with the thinning factor `n/m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub fmc_paths: usize,
    pub lsmc_paths: usize,
    pub potential_speedup: f64,
    pub scenarios: usize,
    pub regression_scenarios: usize,
    pub thinning_factor: f64,
}

impl SpeedupReport {
    pub fn new(fmc_paths: usize, lsmc_paths: usize, scenarios: usize, regression_scenarios: usize) -> Result<Self> {
        if fmc_paths == 0 || lsmc_paths == 0 || regression_scenarios == 0 {
            bail!("speedup needs positive path and scenario counts");
        }
        Ok(Self {
            fmc_paths,
            lsmc_paths,
            potential_speedup: fmc_paths as f64 / lsmc_paths as f64,
            scenarios,
            regression_scenarios,
            thinning_factor: scenarios as f64 / regression_scenarios as f64,
        })
    }
}

/// A panel quantity usable as a KS column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Price,
    Delta,
    Vega,
    RhoFwd(usize),
    RhoZero(usize),
}

impl Quantity {
    pub fn extract(self, panels: &[SensitivityPanel]) -> Vec<f64> {
        panels
            .iter()
            .map(|p| match self {
                Self::Price => p.price,
                Self::Delta => p.delta,
                Self::Vega => p.vega,
                Self::RhoFwd(k) => p.rho_fwd[k],
                Self::RhoZero(k) => p.rho_zero[k],
            })
            .collect()
    }
}

/// One line of `ks_table.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub method: String,
    pub seed: u64,
    pub paths: usize,
    pub sensitivity: String,
    pub d_statistic: f64,
    pub p_value: f64,
    pub passed: bool,
}

/// KS rows of `candidate` against `benchmark` for each named quantity.
pub fn ks_rows(
    method: &str,
    seed: u64,
    paths: usize,
    quantities: &[(String, Quantity)],
    benchmark: &[SensitivityPanel],
    candidate: &[SensitivityPanel],
    alpha: f64,
) -> Result<Vec<KsRow>> {
    quantities
        .iter()
        .map(|(name, q)| {
            let KsResult { d_statistic, p_value, .. } = ks_two_sample(&q.extract(benchmark), &q.extract(candidate))?;
            Ok(KsRow {
                method: method.to_string(),
                seed,
                paths,
                sensitivity: name.clone(),
                d_statistic,
                p_value,
                passed: p_value >= alpha,
            })
        })
        .collect()
}

/// `1 − Σ(y − ŷ)² / Σ(y − ȳ)²` of `fitted` against `reference`.
pub fn r_squared(reference: &[f64], fitted: &[f64]) -> f64 {
    let n = reference.len() as f64;
    let mean = reference.iter().sum::<f64>() / n;
    let ss_tot: f64 = reference.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = reference.iter().zip(fitted).map(|(y, f)| (y - f).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Output directory that remembers what was written to it.
#[derive(Debug)]
pub struct Bundle {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn into_files(self) -> Vec<PathBuf> {
        self.files
    }

    /// Writes `name` through `body`.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.dir.join(name);
        let mut out = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        body(&mut out)?;
        out.flush()?;
        self.files.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// CSV with a header and one row per index of the equally long columns.
    pub fn columns(&mut self, name: &str, header: &[String], columns: &[Vec<f64>]) -> Result<()> {
        if header.len() != columns.len() || columns.windows(2).any(|w| w[0].len() != w[1].len()) {
            bail!("{name}: columns and header disagree");
        }
        self.write(name, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(header)?;
            let rows = columns.first().map_or(0, Vec::len);
            for i in 0..rows {
                csv.write_record(columns.iter().map(|c| fmt_f64(c[i])))?;
            }
            csv.flush()?;
            Ok(())
        })
    }

    pub fn records<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        self.write(name, |w| {
            let mut csv = csv::Writer::from_writer(w);
            for r in rows {
                csv.serialize(r)?;
            }
            csv.flush()?;
            Ok(())
        })
    }

    /// Panels with their regressors: scenario, S, P, price, delta, vega and the
    /// chosen rho columns.
    pub fn panels(
        &mut self,
        name: &str,
        stocks: &[f64],
        factor: &[f64],
        panels: &[SensitivityPanel],
        rhos: &[(String, Quantity)],
    ) -> Result<()> {
        let mut header: Vec<String> = ["scenario", "stock", "factor", "price", "delta", "vega"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(rhos.iter().map(|(n, _)| n.clone()));
        let mut cols = vec![
            panels.iter().map(|p| p.scenario_index as f64).collect(),
            panels.iter().map(|p| stocks[p.scenario_index]).collect(),
            panels.iter().map(|p| factor[p.scenario_index]).collect(),
            Quantity::Price.extract(panels),
            Quantity::Delta.extract(panels),
            Quantity::Vega.extract(panels),
        ];
        cols.extend(rhos.iter().map(|(_, q)| q.extract(panels)));
        self.columns(name, &header, &cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speedup_is_the_path_ratio() {
        let s = SpeedupReport::new(4096, 16, 5000, 5000).unwrap();
        assert_eq!(s.potential_speedup, 256.0);
        assert_eq!(s.thinning_factor, 1.0);
        let b = SpeedupReport::new(16384, 1024, 4096, 2000).unwrap();
        assert_eq!(b.potential_speedup, 16.0);
        assert_eq!(b.thinning_factor, 2.048);
        assert!(SpeedupReport::new(4096, 0, 1, 1).is_err());
    }

    #[test]
    fn r_squared_of_exact_fit_is_one() {
        let y = [1.0, 2.0, 4.0];
        assert_eq!(r_squared(&y, &y), 1.0);
        assert!((r_squared(&y, &[7.0 / 3.0; 3])).abs() < 1e-15);
    }

    #[test]
    fn bundle_writes_deterministic_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = Bundle::create(dir.path()).unwrap();
        b.columns("t.csv", &["a".into(), "b".into()], &[vec![1.0, 0.1], vec![-2.5, 1e-20]])
            .unwrap();
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "a,b\n1,-2.5\n0.1,1e-20\n");
        assert!(b.columns("bad.csv", &["a".into()], &[vec![1.0], vec![2.0]]).is_err());
    }
}
