//! Turning per-scenario sensitivity panels into margin records.

use super::{RiskClass, SensitivityRecord, SimmParams};
use crate::error::{invalid, Result};
use crate::sensitivity::SensitivityPanel;

/// Splits amounts at `from` tenors linearly between the two neighbouring
/// `to` tenors; amounts outside the `to` range go to the nearest end.
/// The total is preserved.
pub fn allocate_to_tenors(amounts: &[f64], from: &[f64], to: &[f64]) -> Result<Vec<f64>> {
    if amounts.len() != from.len() {
        return invalid(format!("{} amounts for {} tenors", amounts.len(), from.len()));
    }
    if to.is_empty() || to.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("target tenors must be non-empty and increasing");
    }
    let mut out = vec![0.0; to.len()];
    for (&a, &t) in amounts.iter().zip(from) {
        let j = to.partition_point(|&x| x <= t);
        if j == 0 {
            out[0] += a;
        } else if j == to.len() {
            out[j - 1] += a;
        } else {
            let w = (to[j] - t) / (to[j] - to[j - 1]);
            out[j - 1] += w * a;
            out[j] += (1.0 - w) * a;
        }
    }
    Ok(out)
}

/// Static data needed to express one position's panel as records.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRecordContext {
    pub underlying: String,
    pub eq_bucket: u32,
    pub ir_bucket: u32,
    pub spot: f64,
    pub vol: f64,
    pub maturity_days: f64,
    /// Tenors (years) of the zero-rate sensitivities in the panel.
    pub rate_tenors: Vec<f64>,
    pub quantity: f64,
}

/// Equity delta `S·∂V/∂S`, equity vega `σ·∂V/∂σ`, and zero-rate rhos per
/// basis point allocated onto the parameter tenors. Zero amounts are dropped.
pub fn panel_records(
    panel: &SensitivityPanel,
    ctx: &PanelRecordContext,
    params: &SimmParams,
) -> Result<Vec<SensitivityRecord>> {
    let q = ctx.quantity;
    let mut out = Vec::new();
    let delta = q * ctx.spot * panel.delta;
    if delta != 0.0 {
        out.push(SensitivityRecord::delta(RiskClass::Equity, ctx.eq_bucket, &ctx.underlying, delta));
    }
    let vega = q * ctx.vol * panel.vega;
    if vega != 0.0 {
        out.push(SensitivityRecord::vega(
            RiskClass::Equity,
            ctx.eq_bucket,
            &ctx.underlying,
            vega,
            ctx.maturity_days,
        ));
    }
    let per_bp: Vec<f64> = panel.rho_zero.iter().map(|r| q * r * 1e-4).collect();
    let ir = allocate_to_tenors(&per_bp, &ctx.rate_tenors, &params.ir.tenor_years)?;
    for (label, amount) in params.ir.tenors.iter().zip(ir) {
        if amount != 0.0 {
            out.push(SensitivityRecord::delta(RiskClass::InterestRate, ctx.ir_bucket, label, amount));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn allocation_splits_linearly() {
        let to = [1.0, 2.0, 5.0];
        let got = allocate_to_tenors(&[10.0, 3.0, 4.0, 6.0], &[1.5, 0.5, 3.5, 7.0], &to).unwrap();
        assert_eq!(got, vec![5.0 + 3.0, 5.0 + 2.0, 2.0 + 6.0]);
        assert_eq!(allocate_to_tenors(&[1.0], &[2.0], &to).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(allocate_to_tenors(&[1.0], &[], &to).is_err());
    }

    #[test]
    fn records_from_panel() {
        let p = SimmParams::illustrative();
        let panel = SensitivityPanel {
            scenario_index: 0,
            price: 5.0,
            delta: 0.5,
            vega: 20.0,
            rho_fwd: vec![],
            rho_zero: vec![0.0, 10.0],
            paths_used: 1,
        };
        let ctx = PanelRecordContext {
            underlying: "ABC".into(),
            eq_bucket: 1,
            ir_bucket: 1,
            spot: 100.0,
            vol: 0.25,
            maturity_days: 272.0,
            rate_tenors: vec![0.0833, 0.5],
            quantity: 2.0,
        };
        let recs = panel_records(&panel, &ctx, &p).unwrap();
        assert_eq!(recs[0], SensitivityRecord::delta(RiskClass::Equity, 1, "ABC", 100.0));
        assert_eq!(recs[1], SensitivityRecord::vega(RiskClass::Equity, 1, "ABC", 10.0, 272.0));
        // The 6m node sits on the 6m parameter tenor exactly.
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].qualifier, "6m");
        assert!((recs[2].amount - 2e-3).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn allocation_preserves_total(a in proptest::collection::vec(-10.0f64..10.0, 1..8), t in proptest::collection::vec(0.01f64..40.0, 8)) {
            let to = [0.0384, 0.0833, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 15.0, 20.0, 30.0];
            let from = &t[..a.len()];
            let got = allocate_to_tenors(&a, from, &to).unwrap();
            let s1: f64 = a.iter().sum();
            let s2: f64 = got.iter().sum();
            prop_assert!((s1 - s2).abs() < 1e-12);
        }
    }
}
