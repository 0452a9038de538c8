use statrs::function::erf::erfc;

use super::{InstrumentKind, InstrumentSpec};
use crate::error::{invalid, Result};
use crate::scenario::ForwardCurve;

/// Price and first-order sensitivities of a vanilla. `rho_fwd[k]` is the
/// derivative with respect to forward period `k` of the supplied curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub price: f64,
    pub delta: f64,
    pub vega: f64,
    pub rho_fwd: Vec<f64>,
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Black–Scholes on the forward `F = S/P`: returns `(price, delta, vega, ∂V/∂P)`.
/// Zero volatility or zero time falls back to discounted intrinsic value with
/// the at-the-money delta split evenly.
pub fn black_scholes(call: bool, spot: f64, strike: f64, vol: f64, tau: f64, discount: f64) -> (f64, f64, f64, f64) {
    let fwd = spot / discount;
    let sd = vol * tau.max(0.0).sqrt();
    let sign = if call { 1.0 } else { -1.0 };
    if sd <= 0.0 || strike <= 0.0 {
        let itm = sign * (fwd - strike);
        let (w, vega) = if itm.abs() <= 1e-14 * fwd.max(1.0) {
            (0.5, spot * tau.max(0.0).sqrt() * norm_pdf(0.0))
        } else if itm > 0.0 {
            (1.0, 0.0)
        } else {
            (0.0, 0.0)
        };
        let price = discount * itm.max(0.0);
        return (price, sign * w, vega, -sign * strike * w);
    }
    let d1 = ((fwd / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    let n1 = norm_cdf(sign * d1);
    let n2 = norm_cdf(sign * d2);
    let price = sign * (spot * n1 - strike * discount * n2);
    let vega = spot * norm_pdf(d1) * tau.sqrt();
    (price, sign * n1, vega, -sign * strike * n2)
}

/// Closed-form valuation at time `t` of a vanilla maturing at `spec.maturity`,
/// with `curve` the discount curve seen from `t`.
pub fn closed_form(spec: &InstrumentSpec, spot: f64, vol: f64, curve: &ForwardCurve, t: f64) -> Result<ClosedForm> {
    spec.validate()?;
    let tau = spec.maturity - t;
    if tau < 0.0 {
        return invalid(format!("instrument matured at {} before {t}", spec.maturity));
    }
    if !(spot > 0.0) {
        return invalid("spot must be positive");
    }
    let discount = curve.discount(tau);
    // ∂P/∂f_k = −P·overlap_k(τ)
    let dp_df: Vec<f64> = (0..curve.num_periods()).map(|k| -discount * curve.overlap(k, tau)).collect();
    let (price, delta, vega, dv_dp) = match spec.kind {
        InstrumentKind::EuropeanCall | InstrumentKind::EuropeanPut => black_scholes(
            spec.kind == InstrumentKind::EuropeanCall,
            spot,
            spec.strike,
            vol,
            tau,
            discount,
        ),
        InstrumentKind::Forward => (spot - spec.strike * discount, 1.0, 0.0, -spec.strike),
        InstrumentKind::Futures => (
            spot / discount - spec.strike,
            1.0 / discount,
            0.0,
            -spot / (discount * discount),
        ),
        k => return invalid(format!("{k:?} has no closed form")),
    };
    Ok(ClosedForm {
        price,
        delta,
        vega,
        rho_fwd: dp_df.iter().map(|d| dv_dp * d).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: InstrumentKind, strike: f64, maturity: f64) -> InstrumentSpec {
        InstrumentSpec::vanilla(kind, "ABC", strike, maturity)
    }

    /// Textbook Black–Scholes with a flat rate, written independently.
    fn oracle_call(s: f64, k: f64, sigma: f64, r: f64, t: f64) -> f64 {
        let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / (sigma * t.sqrt());
        let d2 = d1 - sigma * t.sqrt();
        let n = |x: f64| 0.5 * (1.0 + statrs::function::erf::erf(x / 2.0_f64.sqrt()));
        s * n(d1) - k * (-r * t).exp() * n(d2)
    }

    #[test]
    fn call_matches_textbook_value() {
        let c = closed_form(&spec(InstrumentKind::EuropeanCall, 100.0, 1.0), 100.0, 0.2, &ForwardCurve::flat(0.02), 0.0)
            .unwrap();
        assert!((c.price - oracle_call(100.0, 100.0, 0.2, 0.02, 1.0)).abs() < 1e-12);
        assert!((c.price - 8.916).abs() < 5e-4);
    }

    #[test]
    fn put_call_parity() {
        let curve = ForwardCurve::from_forwards(vec![0.5, 1.0, 2.0], vec![0.02, 0.03, 0.035]).unwrap();
        for (s, k) in [(100.0, 90.0), (100.0, 100.0), (80.0, 120.0)] {
            let c = closed_form(&spec(InstrumentKind::EuropeanCall, k, 1.5), s, 0.3, &curve, 0.0).unwrap();
            let p = closed_form(&spec(InstrumentKind::EuropeanPut, k, 1.5), s, 0.3, &curve, 0.0).unwrap();
            let f = closed_form(&spec(InstrumentKind::Forward, k, 1.5), s, 0.3, &curve, 0.0).unwrap();
            assert!((c.price - p.price - f.price).abs() < 1e-10);
            assert!((c.delta - p.delta - 1.0).abs() < 1e-12);
            for k in 0..3 {
                assert!((c.rho_fwd[k] - p.rho_fwd[k] - f.rho_fwd[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn greeks_match_bumped_prices() {
        let curve = ForwardCurve::from_forwards(vec![0.5, 1.0], vec![0.02, 0.03]).unwrap();
        for kind in [
            InstrumentKind::EuropeanCall,
            InstrumentKind::EuropeanPut,
            InstrumentKind::Forward,
            InstrumentKind::Futures,
        ] {
            let sp = spec(kind, 95.0, 1.2);
            let v = |s: f64, vol: f64, c: &ForwardCurve| closed_form(&sp, s, vol, c, 0.0).unwrap().price;
            let base = closed_form(&sp, 100.0, 0.25, &curve, 0.0).unwrap();
            let h = 1e-4;
            let delta = (v(100.0 + h, 0.25, &curve) - v(100.0 - h, 0.25, &curve)) / (2.0 * h);
            let vega = (v(100.0, 0.25 + h, &curve) - v(100.0, 0.25 - h, &curve)) / (2.0 * h);
            assert!((delta - base.delta).abs() < 1e-7, "{kind:?}");
            assert!((vega - base.vega).abs() < 1e-6, "{kind:?}");
            for k in 0..2 {
                let rho = (v(100.0, 0.25, &curve.bumped(k, h)) - v(100.0, 0.25, &curve.bumped(k, -h))) / (2.0 * h);
                assert!((rho - base.rho_fwd[k]).abs() < 1e-6, "{kind:?} rho {k}");
            }
        }
    }

    #[test]
    fn forward_struck_at_forward_is_worthless() {
        let curve = ForwardCurve::flat(0.03);
        let k = 100.0 / curve.discount(1.0);
        let f = closed_form(&spec(InstrumentKind::Forward, k, 1.0), 100.0, 0.2, &curve, 0.0).unwrap();
        assert!(f.price.abs() < 1e-12);
        assert_eq!(f.delta, 1.0);
    }

    #[test]
    fn zero_vol_is_intrinsic() {
        let curve = ForwardCurve::flat(0.0);
        let atm = closed_form(&spec(InstrumentKind::EuropeanCall, 100.0, 1.0), 100.0, 0.0, &curve, 0.0).unwrap();
        assert_eq!(atm.price, 0.0);
        assert_eq!(atm.delta, 0.5);
        assert!(atm.vega.is_finite());
        let itm = closed_form(&spec(InstrumentKind::EuropeanPut, 110.0, 1.0), 100.0, 0.0, &curve, 0.0).unwrap();
        assert!((itm.price - 10.0).abs() < 1e-12);
        assert_eq!(itm.delta, -1.0);
        // Tiny vol approaches the intrinsic limit continuously.
        let near = closed_form(&spec(InstrumentKind::EuropeanPut, 110.0, 1.0), 100.0, 1e-6, &curve, 0.0).unwrap();
        assert!((near.price - itm.price).abs() < 1e-9);
    }

    #[test]
    fn exotics_have_no_closed_form() {
        let a = InstrumentSpec::asian("ABC", 100.0, vec![(1.0, 1.0)]);
        assert!(closed_form(&a, 100.0, 0.2, &ForwardCurve::flat(0.02), 0.0).is_err());
    }
}
