use crate::error::{invalid, Result};

/// Lower-triangular factor of a small positive semi-definite matrix.
///
/// Zero pivots (degenerate directions, e.g. a zero volatility) yield zero
/// columns instead of an error; clearly negative pivots are rejected.
pub fn cholesky_psd(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = cov.len();
    let scale = (0..n).map(|i| cov[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut d = cov[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d < -tol {
            return invalid("covariance matrix is not positive semi-definite");
        }
        let pivot = if d > tol { d.sqrt() } else { 0.0 };
        l[j][j] = pivot;
        for i in j + 1..n {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = if pivot > 0.0 { s / pivot } else { 0.0 };
        }
    }
    Ok(l)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_matrix() {
        let c = vec![
            vec![4.0, 2.0, 0.4],
            vec![2.0, 3.0, 0.3],
            vec![0.4, 0.3, 1.0],
        ];
        let l = cholesky_psd(&c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - c[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_variance_direction_gives_zero_column() {
        let c = vec![vec![0.0, 0.0], vec![0.0, 1.0]];
        let l = cholesky_psd(&c).unwrap();
        assert_eq!(l, vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let c = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(cholesky_psd(&c).is_err());
    }
}
