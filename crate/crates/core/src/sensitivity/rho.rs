//! Conversion between sensitivities to piecewise-flat forwards and to the zero
//! rates at the curve nodes, using `f_k = (T_k z_k − T_{k−1} z_{k−1}) / (T_k − T_{k−1})`.

use crate::error::{invalid, Result};
use crate::scenario::ForwardCurve;


fn check(values: &[f64], tenors: &[f64]) -> Result<()> {
    ForwardCurve::from_forwards(tenors.to_vec(), vec![0.0; tenors.len()])?;
    if values.len() != tenors.len() {
        return invalid(format!(
            "{} sensitivities for {} periods ending at the tenors",
            values.len(),
            tenors.len()
        ));
    }
    Ok(())
}

/// `∂V/∂z = Jᵀ ∂V/∂f` with `J = ∂f/∂z`, which is lower bidiagonal.
pub fn forward_to_zero_rho(rho_fwd: &[f64], tenors: &[f64]) -> Result<Vec<f64>> {
    check(rho_fwd, tenors)?;
    let n = tenors.len();
    let width = |k: usize| tenors[k] - if k == 0 { 0.0 } else { tenors[k - 1] };
    Ok((0..n)
        .map(|j| {
            let own = rho_fwd[j] * tenors[j] / width(j);
            let next = if j + 1 < n { rho_fwd[j + 1] * tenors[j] / width(j + 1) } else { 0.0 };
            own - next
        })
        .collect())
}

/// `∂V/∂f = (∂z/∂f)ᵀ ∂V/∂z` with `∂z_j/∂f_k = ΔT_k / T_j` for `k ≤ j`.
pub fn zero_to_forward_rho(rho_zero: &[f64], tenors: &[f64]) -> Result<Vec<f64>> {
    check(rho_zero, tenors)?;
    let n = tenors.len();
    let mut out = vec![0.0; n];
    let mut tail = 0.0;
    for k in (0..n).rev() {
        tail += rho_zero[k] / tenors[k];
        let width = tenors[k] - if k == 0 { 0.0 } else { tenors[k - 1] };
        out[k] = tail * width;
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_period_is_identity() {
        assert_eq!(forward_to_zero_rho(&[3.5], &[0.5]).unwrap(), vec![3.5]);
    }

    #[test]
    fn two_equal_periods_match_symbolic_jacobian() {
        // f1 = z1, f2 = 2 z2 − z1 for tenors (t, 2t).
        let (a, b) = (1.5, -0.7);
        let z = forward_to_zero_rho(&[a, b], &[0.25, 0.5]).unwrap();
        assert!((z[0] - (a - b)).abs() < 1e-15);
        assert!((z[1] - 2.0 * b).abs() < 1e-15);
    }

    #[test]
    fn matches_finite_difference_of_curve() {
        let tenors = vec![0.1, 0.3, 0.7, 1.5];
        let zeros = [0.02, 0.025, 0.031, 0.029];
        // V(z) = Σ w_k f_k(z) has ∂V/∂f = w.
        let w = [1.0, -2.0, 0.5, 3.0];
        let v = |z: &[f64]| -> f64 {
            let c = ForwardCurve::from_zero_rates(tenors.clone(), z).unwrap();
            c.forwards().iter().zip(w).map(|(f, w)| f * w).sum()
        };
        let rz = forward_to_zero_rho(&w, &tenors).unwrap();
        for j in 0..4 {
            let h = 1e-6;
            let (mut up, mut dn) = (zeros, zeros);
            up[j] += h;
            dn[j] -= h;
            let fd = (v(&up) - v(&dn)) / (2.0 * h);
            assert!((fd - rz[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let tenors = [14.0 / 365.0, 30.0 / 365.0, 91.0 / 365.0, 182.0 / 365.0];
        let r = [0.3, -1.2, 4.0, 7.5];
        let back = zero_to_forward_rho(&forward_to_zero_rho(&r, &tenors).unwrap(), &tenors).unwrap();
        for (a, b) in r.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_partitioning_tenors_are_rejected() {
        assert!(forward_to_zero_rho(&[1.0, 2.0], &[0.5, 0.5]).is_err());
        assert!(forward_to_zero_rho(&[1.0], &[0.5, 1.0]).is_err());
        assert_eq!(forward_to_zero_rho(&[0.0, 0.0], &[0.5, 1.0]).unwrap(), vec![0.0, 0.0]);
    }
}
