//! Two-sample Kolmogorov–Smirnov test, QQ points and relative-error
//! histograms for comparing smoothed estimates against benchmarks.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

impl KsResult {
    /// Not rejected at the 95% level.
    pub fn passes(&self) -> bool {
        self.p_value >= 0.05
    }
}

fn sorted_finite(x: &[f64], name: &str) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return invalid(format!("{name} contains non-finite values"));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`,
/// switching to the theta-function form for small `λ` where the alternating
/// series converges slowly.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (c * ((2 * k - 1) as f64).powi(2)).exp()).sum();
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let t = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample KS test with the asymptotic p-value at effective size
/// `n₁n₂/(n₁+n₂)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 2 || b.len() < 2 {
        return invalid(format!("KS needs at least two samples each, got {} and {}", a.len(), b.len()));
    }
    let a = sorted_finite(a, "first sample")?;
    let b = sorted_finite(b, "second sample")?;
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] == x {
            i += 1;
        }
        while j < n2 && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(KsResult {
        d_statistic: d,
        p_value: kolmogorov_q(ne.sqrt() * d),
        n1,
        n2,
    })
}

/// Linear interpolation between order statistics (`h = (n−1)p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqSeries {
    pub probabilities: Vec<f64>,
    pub benchmark_q: Vec<f64>,
    pub candidate_q: Vec<f64>,
}

/// Quantiles of both samples at `levels` equispaced probabilities in [0, 1].
pub fn qq_points(benchmark: &[f64], candidate: &[f64], levels: usize) -> Result<QqSeries> {
    if levels < 2 {
        return invalid(format!("QQ needs at least two levels, got {levels}"));
    }
    if benchmark.is_empty() || candidate.is_empty() {
        return invalid("QQ needs non-empty samples");
    }
    let b = sorted_finite(benchmark, "benchmark")?;
    let c = sorted_finite(candidate, "candidate")?;
    let probabilities: Vec<f64> = (0..levels).map(|i| i as f64 / (levels - 1) as f64).collect();
    Ok(QqSeries {
        benchmark_q: probabilities.iter().map(|&p| quantile_sorted(&b, p)).collect(),
        candidate_q: probabilities.iter().map(|&p| quantile_sorted(&c, p)).collect(),
        probabilities,
    })
}

impl QqSeries {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["probability", "benchmark", "candidate"]).map_err(io)?;
        for ((p, b), c) in self.probabilities.iter().zip(&self.benchmark_q).zip(&self.candidate_q) {
            w.write_record([format!("{p:.6}"), format!("{b:.12e}"), format!("{c:.12e}")])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBins {
    /// Percent.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for HistogramBins {
    fn default() -> Self {
        Self { lo: -10.0, hi: 10.0, count: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrorHistogram {
    /// `count + 1` edges in percent.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
    /// Pairs with a zero benchmark, excluded from everything else.
    pub skipped: usize,
    pub min: f64,
    pub max: f64,
    /// Per-scenario errors in percent.
    pub errors: Vec<f64>,
}

impl RelativeErrorHistogram {
    /// Share of the (non-skipped) errors inside `[lo, hi]` percent.
    pub fn fraction_within(&self, lo: f64, hi: f64) -> f64 {
        if self.errors.is_empty() {
            return 0.0;
        }
        self.errors.iter().filter(|e| (lo..=hi).contains(*e)).count() as f64 / self.errors.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "count"]).map_err(io)?;
        w.write_record(["-inf".to_string(), format!("{}", self.edges[0]), self.below.to_string()])
            .map_err(io)?;
        for (k, c) in self.counts.iter().enumerate() {
            w.write_record([format!("{}", self.edges[k]), format!("{}", self.edges[k + 1]), c.to_string()])
                .map_err(io)?;
        }
        w.write_record([format!("{}", self.edges[self.counts.len()]), "inf".to_string(), self.above.to_string()])
            .map_err(io)?;
        w.flush().map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))
    }
}

/// Histogram of `100·(candidate − benchmark)/benchmark`; bins are
/// half-open `[lo, hi)` with the last bin closed.
pub fn relative_error_histogram(
    benchmark: &[f64],
    candidate: &[f64],
    bins: HistogramBins,
) -> Result<RelativeErrorHistogram> {
    if benchmark.len() != candidate.len() {
        return invalid(format!("{} benchmark values for {} candidates", benchmark.len(), candidate.len()));
    }
    if bins.count == 0 || !(bins.lo < bins.hi) {
        return invalid("histogram needs at least one bin and lo < hi");
    }
    let width = (bins.hi - bins.lo) / bins.count as f64;
    let edges: Vec<f64> = (0..=bins.count).map(|k| bins.lo + k as f64 * width).collect();
    let mut h = RelativeErrorHistogram {
        edges,
        counts: vec![0; bins.count],
        below: 0,
        above: 0,
        skipped: 0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        errors: Vec::with_capacity(benchmark.len()),
    };
    for (&b, &c) in benchmark.iter().zip(candidate) {
        if b == 0.0 || !b.is_finite() || !c.is_finite() {
            h.skipped += 1;
            continue;
        }
        let e = 100.0 * (c - b) / b;
        h.min = h.min.min(e);
        h.max = h.max.max(e);
        h.errors.push(e);
        if e < bins.lo {
            h.below += 1;
        } else if e > bins.hi {
            h.above += 1;
        } else {
            let k = (((e - bins.lo) / width) as usize).min(bins.count - 1);
            h.counts[k] += 1;
        }
    }
    if h.skipped > 0 {
        log::warn!("{} scenario(s) with zero benchmark skipped in relative errors", h.skipped);
    }
    Ok(h)
}
