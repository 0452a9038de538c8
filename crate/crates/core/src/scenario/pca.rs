use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};

/// First principal-component scores of a cross-section of curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFactor {
    pub values: Vec<f64>,
    pub explained_variance_ratio: f64,
    /// Unit loading vector, oriented to have a positive sum.
    pub loading: Vec<f64>,
}

/// PCA of the mean-centred `n × m` matrix given as rows; only the leading
/// component is kept.
pub fn pca_first_factor(curves: &[Vec<f64>]) -> Result<CurveFactor> {
    let n = curves.len();
    if n < 2 {
        return invalid("PCA needs at least two curves");
    }
    let m = curves[0].len();
    if m == 0 || curves.iter().any(|c| c.len() != m) {
        return invalid("curves must be non-empty and of equal length");
    }
    let mut means = vec![0.0; m];
    for c in curves {
        for (mu, v) in means.iter_mut().zip(c) {
            *mu += v;
        }
    }
    means.iter_mut().for_each(|mu| *mu /= n as f64);
    let centred = DMatrix::from_fn(n, m, |i, j| curves[i][j] - means[j]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let total = cov.trace();
    let scale = means.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    if !(total > 1e-28 * scale * scale) {
        let mut loading = vec![0.0; m];
        loading[0] = 1.0;
        return Ok(CurveFactor {
            values: vec![0.0; n],
            explained_variance_ratio: 1.0,
            loading,
        });
    }
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.imax();
    let mut loading: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    if loading.iter().sum::<f64>() < 0.0 {
        loading.iter_mut().for_each(|v| *v = -*v);
    }
    let mut values: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|j| centred[(i, j)] * loading[j]).sum())
        .collect();
    let mean_score = values.iter().sum::<f64>() / n as f64;
    values.iter_mut().for_each(|v| *v -= mean_score);
    Ok(CurveFactor {
        values,
        explained_variance_ratio: (eig.eigenvalues[top] / total).clamp(0.0, 1.0),
        loading,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_example_matches_hand_eigensolve() {
        // Covariance [[1, .5], [.5, 1]]: eigenvalues 1.5 and 0.5, leading vector (1,1)/√2.
        let f = pca_first_factor(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        assert!((f.explained_variance_ratio - 0.75).abs() < 1e-12);
        let s = 1.0 / 2.0_f64.sqrt();
        for (v, e) in f.values.iter().zip([s, s, -2.0 * s]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_cross_section() {
        let shape = [1.0, 2.0, 3.0];
        let curves: Vec<Vec<f64>> = (0..10)
            .map(|i| shape.iter().map(|s| 0.05 + 0.01 * i as f64 * s).collect())
            .collect();
        let f = pca_first_factor(&curves).unwrap();
        assert!((f.explained_variance_ratio - 1.0).abs() < 1e-12);
        assert!(f.values[9] > f.values[0]);
        assert!(f.values.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn constant_curves_give_zero_scores() {
        let f = pca_first_factor(&vec![vec![0.03, 0.04]; 5]).unwrap();
        assert_eq!(f.explained_variance_ratio, 1.0);
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_few_rows_is_an_error() {
        assert!(pca_first_factor(&[vec![1.0]]).is_err());
    }
}
