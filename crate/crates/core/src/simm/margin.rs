use std::collections::{BTreeMap, BTreeSet};

use statrs::function::erf::erfc_inv;

use super::{
    Measure, ProductClass, ProductResult, RiskClass, RiskClassMargins, SensitivityRecord, SimmParams, SimmResult,
};
use crate::error::{Error, Result};

/// `√(Σ_kl ρ_kl x_k x_l)` with the radicand clamped at zero.
fn radical(x: &[f64], corr: impl Fn(usize, usize) -> f64) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += x[i] * x[i];
        for j in 0..x.len() {
            if i != j {
                s += corr(i, j) * x[i] * x[j];
            }
        }
    }
    if s < 0.0 {
        log::warn!("negative radicand {s:.6e} clamped to zero");
        0.0
    } else {
        s.sqrt()
    }
}

/// Common risk class and bucket of a record set; `None` when empty.
fn single_bucket(records: &[SensitivityRecord], measure: Measure) -> Result<Option<(RiskClass, u32)>> {
    let Some(first) = records.first() else {
        return Ok(None);
    };
    for r in records {
        r.validate()?;
        if r.measure != measure {
            return Err(Error::InvalidInput(format!(
                "{:?} record for {} passed to {:?} margin",
                r.measure, r.qualifier, measure
            )));
        }
        if r.risk_class != first.risk_class || r.bucket != first.bucket {
            return Err(Error::InvalidInput(format!(
                "records span {} bucket {} and {} bucket {}; margins are computed per single bucket",
                first.risk_class, first.bucket, r.risk_class, r.bucket
            )));
        }
    }
    Ok(Some((first.risk_class, first.bucket)))
}

/// Sums amounts per qualifier (deterministic order).
fn net<'a>(records: &'a [SensitivityRecord], value: impl Fn(&SensitivityRecord) -> f64) -> BTreeMap<&'a str, f64> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.qualifier.as_str()).or_insert(0.0) += value(r);
    }
    m
}

/// Weighted sensitivities and their correlation for one class/bucket.
fn weighted<'p>(
    records: &[SensitivityRecord],
    class: RiskClass,
    bucket: u32,
    params: &'p SimmParams,
    value: impl Fn(&SensitivityRecord) -> f64,
    measure: Measure,
) -> Result<(Vec<f64>, Box<dyn Fn(usize, usize) -> f64 + 'p>)> {
    let netted = net(records, value);
    match class {
        RiskClass::InterestRate => {
            let ir = &params.ir;
            let mut idx = Vec::with_capacity(netted.len());
            let mut ws = Vec::with_capacity(netted.len());
            for (q, s) in netted {
                let k = ir.tenor_index(q)?;
                let w = match measure {
                    Measure::Delta => ir.delta_weights[k],
                    Measure::Vega => ir.vega_weight,
                };
                idx.push(k);
                ws.push(w * s);
            }
            Ok((ws, Box::new(move |i, j| ir.correlation(idx[i], idx[j]))))
        }
        RiskClass::Equity => {
            let b = params.eq.bucket(bucket)?;
            let w = match measure {
                Measure::Delta => b.delta_weight,
                Measure::Vega => b.vega_weight * params.eq.historical_volatility_ratio,
            };
            let rho = b.correlation;
            Ok((netted.values().map(|s| w * s).collect(), Box::new(move |_, _| rho)))
        }
        other => Err(Error::MissingParameter(format!("{other} {measure:?} weights"))),
    }
}

/// Delta margin of a single-bucket record set.
pub fn delta_margin(records: &[SensitivityRecord], params: &SimmParams) -> Result<f64> {
    let Some((class, bucket)) = single_bucket(records, Measure::Delta)? else {
        return Ok(0.0);
    };
    let (ws, corr) = weighted(records, class, bucket, params, |r| r.amount, Measure::Delta)?;
    Ok(radical(&ws, corr))
}

/// Vega margin of a single-bucket set of vega records.
pub fn vega_margin(records: &[SensitivityRecord], params: &SimmParams) -> Result<f64> {
    let Some((class, bucket)) = single_bucket(records, Measure::Vega)? else {
        return Ok(0.0);
    };
    let (ws, corr) = weighted(records, class, bucket, params, |r| r.amount, Measure::Vega)?;
    Ok(radical(&ws, corr))
}

/// `SF(t) = 0.5·min(1, floor/t)` with `t` in days.
pub fn scaling_function(maturity_days: f64, floor_days: f64) -> f64 {
    0.5 * (floor_days / maturity_days).min(1.0)
}

/// Curvature margin from vega records:
/// `CVR_k = Σ SF(t)·vega`, `K = √(Σ ρ²_kl CVR_k CVR_l)`,
/// `θ = min(ΣCVR / Σ|CVR|, 0)`, `λ = (Φ⁻¹(q)² − 1)(1 + θ) − θ`,
/// margin `max(ΣCVR + λK, 0)`.
pub fn curvature_margin(records: &[SensitivityRecord], params: &SimmParams) -> Result<f64> {
    let Some((class, bucket)) = single_bucket(records, Measure::Vega)? else {
        return Ok(0.0);
    };
    if let Some(r) = records.iter().find(|r| r.maturity_days.is_none()) {
        return Err(Error::InvalidInput(format!(
            "vega record for {} has no maturity; curvature needs one",
            r.qualifier
        )));
    }
    let floor = params.curvature_floor_days;
    let sf = |r: &SensitivityRecord| scaling_function(r.maturity_days.unwrap_or(f64::NAN), floor) * r.amount;
    // Unit weights: reuse the correlation structure of the vega aggregation.
    let cvr: Vec<f64> = net(records, sf).into_values().collect();
    let (_, corr) = weighted(records, class, bucket, params, |r| r.amount, Measure::Vega)?;
    let k = radical(&cvr, |i, j| corr(i, j).powi(2));
    let sum: f64 = cvr.iter().sum();
    let abs_sum: f64 = cvr.iter().map(|c| c.abs()).sum();
    if abs_sum == 0.0 {
        return Ok(0.0);
    }
    let theta = (sum / abs_sum).min(0.0);
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * params.curvature_quantile);
    let lambda = (z * z - 1.0) * (1.0 + theta) - theta;
    Ok((sum + lambda * k).max(0.0))
}

/// Risk-class IM as the sum of its margins (no base-correlation term).
pub fn im_risk_class(delta: f64, vega: f64, curvature: f64) -> Result<f64> {
    for (name, v) in [("delta", delta), ("vega", vega), ("curvature", curvature)] {
        if !(v >= 0.0) {
            return Err(Error::InvariantViolation(format!("{name} margin {v} is negative")));
        }
    }
    Ok(delta + vega + curvature)
}

/// `√(Σ IM_r² + Σ_{r≠s} ψ_rs IM_r IM_s)`.
pub fn simm_product(ims: &[f64], psi: &[Vec<f64>]) -> Result<f64> {
    if psi.len() != ims.len() || psi.iter().any(|row| row.len() != ims.len()) {
        return Err(Error::InvalidInput(format!(
            "{} risk-class IMs against a {}-row correlation matrix",
            ims.len(),
            psi.len()
        )));
    }
    for i in 0..ims.len() {
        if psi[i][i] != 1.0 {
            return Err(Error::InvalidInput(format!("psi diagonal entry {i} is {}", psi[i][i])));
        }
        for j in 0..i {
            if psi[i][j] != psi[j][i] {
                return Err(Error::InvalidInput(format!("psi is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(radical(ims, |i, j| psi[i][j]))
}

/// Two-class case with rates and equity.
pub fn simm_portfolio_simplified(im_ir: f64, im_eq: f64, psi: f64) -> f64 {
    radical(&[im_ir, im_eq], |_, _| psi)
}

/// Full aggregation. Each present risk class must sit in a single bucket.
pub fn compute_simm(records: &[SensitivityRecord], params: &SimmParams) -> Result<SimmResult> {
    let mut grouped: BTreeMap<ProductClass, BTreeMap<RiskClass, (Vec<SensitivityRecord>, Vec<SensitivityRecord>)>> =
        BTreeMap::new();
    for r in records {
        r.validate()?;
        let slot = grouped.entry(r.product_class).or_default().entry(r.risk_class).or_default();
        match r.measure {
            Measure::Delta => slot.0.push(r.clone()),
            Measure::Vega => slot.1.push(r.clone()),
        }
    }
    let mut result = SimmResult::default();
    for (product, classes) in grouped {
        let mut pr = ProductResult::default();
        for (class, (deltas, vegas)) in classes {
            let delta = delta_margin(&deltas, params)?;
            let vega = vega_margin(&vegas, params)?;
            let curvature = curvature_margin(&vegas, params)?;
            let im = im_risk_class(delta, vega, curvature)?;
            pr.risk_classes.insert(class, RiskClassMargins { delta, vega, curvature, im });
        }
        let present: Vec<(RiskClass, f64)> = pr
            .risk_classes
            .iter()
            .filter(|(_, m)| m.im > 0.0)
            .map(|(c, m)| (*c, m.im))
            .collect();
        let mut psi = vec![vec![0.0; present.len()]; present.len()];
        for (i, (r, _)) in present.iter().enumerate() {
            for (j, (s, _)) in present.iter().enumerate() {
                psi[i][j] = params.psi(*r, *s)?;
            }
        }
        let ims: Vec<f64> = present.iter().map(|p| p.1).collect();
        pr.simm = simm_product(&ims, &psi)?;
        result.total += pr.simm;
        result.products.insert(product, pr);
    }
    Ok(result)
}

/// Share of the portfolio SIMM attributable to `subset` (indices into
/// `positions`): `(SIMM(all) − SIMM(all \ subset)) / SIMM(all)`.
pub fn marginal_simm(positions: &[Vec<SensitivityRecord>], subset: &[usize], params: &SimmParams) -> Result<f64> {
    let subset: BTreeSet<usize> = subset.iter().copied().collect();
    if let Some(&i) = subset.iter().find(|&&i| i >= positions.len()) {
        return Err(Error::InvalidInput(format!(
            "subset index {i} outside a portfolio of {} positions",
            positions.len()
        )));
    }
    let all: Vec<SensitivityRecord> = positions.iter().flatten().cloned().collect();
    let rest: Vec<SensitivityRecord> = positions
        .iter()
        .enumerate()
        .filter(|(i, _)| !subset.contains(i))
        .flat_map(|(_, p)| p.iter().cloned())
        .collect();
    let full = compute_simm(&all, params)?.total;
    if full == 0.0 {
        return Err(Error::UndefinedRatio("portfolio SIMM is zero".into()));
    }
    Ok((full - compute_simm(&rest, params)?.total) / full)
}
