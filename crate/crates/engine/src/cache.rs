//! On-disk cache of benchmark panels keyed by a hash of everything that
//! determines them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lsmc_core::sensitivity::SensitivityPanel;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// How a cached stage was satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTiming {
    pub cache_hit: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkCache {
    dir: PathBuf,
}

/// Hex SHA-256 of the JSON encoding of `key`.
pub fn hash_key<K: Serialize>(key: &K) -> Result<String> {
    let json = serde_json::to_vec(key)?;
    Ok(format!("{:x}", Sha256::digest(&json)))
}

impl BenchmarkCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, name: &str, hash: &str) -> PathBuf {
        self.dir.join(format!("{name}-{}.csv", &hash[..16]))
    }

    /// Loads the panels stored under `key`, or computes and stores them.
    pub fn panels<K, F>(&self, name: &str, key: &K, compute: F) -> Result<(Vec<SensitivityPanel>, StageTiming)>
    where
        K: Serialize,
        F: FnOnce() -> Result<Vec<SensitivityPanel>>,
    {
        let start = Instant::now();
        let hash = hash_key(key)?;
        let path = self.path_for(name, &hash);
        if path.is_file() {
            match read_panels(&path, &hash) {
                Ok(panels) => {
                    log::info!("benchmark cache hit: {}", path.display());
                    let timing = StageTiming {
                        cache_hit: true,
                        seconds: start.elapsed().as_secs_f64(),
                    };
                    return Ok((panels, timing));
                }
                Err(e) => log::warn!("ignoring unreadable cache file {}: {e:#}", path.display()),
            }
        }
        log::info!("computing benchmark {name}");
        let panels = compute()?;
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let tmp = path.with_extension("tmp");
        write_panels(&tmp, &hash, &panels)?;
        fs::rename(&tmp, &path)?;
        let timing = StageTiming {
            cache_hit: false,
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok((panels, timing))
    }
}

// Shortest round-trip float formatting keeps cached values bit-identical.
fn write_panels(path: &Path, hash: &str, panels: &[SensitivityPanel]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let (nf, nz) = panels.first().map_or((0, 0), |p| (p.rho_fwd.len(), p.rho_zero.len()));
    writeln!(out, "# {hash}")?;
    writeln!(out, "{nf},{nz}")?;
    for p in panels {
        if p.rho_fwd.len() != nf || p.rho_zero.len() != nz {
            bail!("panels have differing rho counts");
        }
        write!(out, "{},{},{},{},{}", p.scenario_index, p.paths_used, p.price, p.delta, p.vega)?;
        for v in p.rho_fwd.iter().chain(&p.rho_zero) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn read_panels(path: &Path, hash: &str) -> Result<Vec<SensitivityPanel>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(format!("# {hash}").as_str()) {
        bail!("hash mismatch");
    }
    let counts: Vec<usize> = lines
        .next()
        .context("missing rho counts")?
        .split(',')
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()?;
    let [nf, nz] = counts[..] else {
        bail!("malformed rho counts");
    };
    let mut panels = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 + nf + nz {
            bail!("malformed row: {line}");
        }
        let num = |i: usize| -> Result<f64> { Ok(fields[i].parse::<f64>()?) };
        let tail = |from: usize, len: usize| -> Result<Vec<f64>> { (from..from + len).map(num).collect() };
        panels.push(SensitivityPanel {
            scenario_index: fields[0].parse()?,
            paths_used: fields[1].parse()?,
            price: num(2)?,
            delta: num(3)?,
            vega: num(4)?,
            rho_fwd: tail(5, nf)?,
            rho_zero: tail(5 + nf, nz)?,
        });
    }
    Ok(panels)
}
