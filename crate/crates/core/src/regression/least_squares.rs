use nalgebra::{DMatrix, DVector};

use super::basis::{BasisSpec, DesignMatrix};
use crate::error::{invalid, Error, Result};
use crate::sensitivity::SensitivityPanel;

/// Largest tolerated ratio of the extreme diagonal entries of `R`.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residual_sum_of_squares: f64,
    /// `max|r_ii| / min|r_ii|` of the triangular factor.
    pub condition_estimate: f64,
}

/// Thin QR factorisation of a design matrix, reusable across responses.
/// Fitted values are `Q Qᵀ y`, i.e. the hat matrix applied to `y`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    condition: f64,
}

impl LeastSquares {
    pub fn new(design: &DesignMatrix) -> Result<Self> {
        let (n, m) = (design.rows(), design.cols());
        if m == 0 {
            return invalid("design matrix has no columns");
        }
        if n <= m {
            return invalid(format!("{n} observations cannot identify {m} coefficients"));
        }
        let x = DMatrix::from_fn(n, m, |i, j| design.columns[j][i]);
        let col_scale: Vec<f64> = design
            .columns
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let qr = x.qr();
        let r = qr.r();
        let mut max_d = 0.0_f64;
        let mut min_d = f64::INFINITY;
        for j in 0..m {
            let d = r[(j, j)].abs();
            if !(d > 1e-10 * col_scale[j].max(f64::MIN_POSITIVE)) {
                return Err(Error::RankDeficient {
                    index: j,
                    label: design.labels[j].clone(),
                });
            }
            max_d = max_d.max(d);
            min_d = min_d.min(d);
        }
        let condition = max_d / min_d;
        if condition > MAX_CONDITION {
            return Err(Error::IllConditioned(condition));
        }
        Ok(Self { q: qr.q(), r, condition })
    }

    pub fn fit(&self, y: &[f64]) -> Result<RegressionFit> {
        if y.len() != self.q.nrows() {
            return invalid(format!("{} responses for {} observations", y.len(), self.q.nrows()));
        }
        let y = DVector::from_column_slice(y);
        let qty = self.q.tr_mul(&y);
        let beta = self
            .r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::LinearAlgebra("singular triangular factor".into()))?;
        let fitted = &self.q * &qty;
        let rss = (&y - &fitted).norm_squared();
        Ok(RegressionFit {
            coefficients: beta.iter().copied().collect(),
            fitted: fitted.iter().copied().collect(),
            residual_sum_of_squares: rss,
            condition_estimate: self.condition,
        })
    }
}

/// Least-squares fit of `y` on the columns of `design`.
pub fn fit(design: &DesignMatrix, y: &[f64]) -> Result<RegressionFit> {
    LeastSquares::new(design)?.fit(y)
}

/// Replaces every panel quantity by its fitted value on `basis`. Variables that
/// are constant across the cross-section are dropped with a warning.
pub fn smooth_panels(
    panels: &[SensitivityPanel],
    basis: &BasisSpec,
    explanatory: &[Vec<f64>],
    tenors: &[f64],
) -> Result<Vec<SensitivityPanel>> {
    basis.validate()?;
    let mut spec = basis.clone();
    let mut vars: Vec<Vec<f64>> = explanatory.to_vec();
    let mut i = 0;
    while i < vars.len() {
        if super::standardize(&vars[i]).is_err() {
            log::warn!("explanatory variable {} is constant; dropped from the basis", spec.variables[i]);
            spec = spec.without(i);
            vars.remove(i);
        } else {
            i += 1;
        }
    }
    if vars.iter().any(|v| v.len() != panels.len()) {
        return invalid("explanatory series and panels differ in length");
    }
    let design = if vars.is_empty() {
        DesignMatrix {
            columns: vec![vec![1.0; panels.len()]],
            labels: vec!["1".into()],
        }
    } else {
        DesignMatrix::build(&spec, &vars)?
    };
    let ls = LeastSquares::new(&design)?;
    let width = panels.first().map_or(0, |p| p.values().len());
    let mut smoothed: Vec<Vec<f64>> = vec![vec![0.0; width]; panels.len()];
    for c in 0..width {
        let y: Vec<f64> = panels.iter().map(|p| p.values()[c]).collect();
        let f = ls.fit(&y)?;
        for (row, v) in smoothed.iter_mut().zip(f.fitted) {
            row[c] = v;
        }
    }
    panels
        .iter()
        .zip(smoothed)
        .map(|(p, v)| SensitivityPanel::from_values(p.scenario_index, &v, tenors, p.paths_used))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design_1d(x: &[f64], degree: usize) -> DesignMatrix {
        let spec = BasisSpec {
            variables: vec!["x".into()],
            degrees: vec![degree],
            include_cross_terms: false,
            max_total_degree: None,
        };
        DesignMatrix::build(&spec, &[x.to_vec()]).unwrap()
    }

    #[test]
    fn exact_quadratic_has_zero_residual() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.3 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 0.5 * v * v).collect();
        let f = fit(&design_1d(&x, 3), &y).unwrap();
        assert!(f.residual_sum_of_squares < 1e-20);
        for (a, b) in f.fitted.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_response_uses_only_the_intercept() {
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sqrt()).collect();
        let f = fit(&design_1d(&x, 2), &[4.2; 12]).unwrap();
        assert!((f.coefficients[0] - 4.2).abs() < 1e-12);
        assert!(f.coefficients[1..].iter().all(|c| c.abs() < 1e-12));
        assert!(f.fitted.iter().all(|v| (v - 4.2).abs() < 1e-12));
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 50;
        let columns: Vec<Vec<f64>> = (0..6).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = DesignMatrix {
            columns: columns.clone(),
            labels: (0..6).map(|i| format!("c{i}")).collect(),
        };
        let f = fit(&d, &y).unwrap();
        let x = DMatrix::from_fn(n, 6, |i, j| columns[j][i]);
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * DVector::from_column_slice(&y);
        let beta = xtx.lu().solve(&xty).unwrap();
        for (a, b) in f.coefficients.iter().zip(beta.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_deficiency_names_the_column() {
        let c: Vec<f64> = (0..10).map(f64::from).collect();
        let d = DesignMatrix {
            columns: vec![vec![1.0; 10], c.clone(), c.iter().map(|v| 2.0 * v).collect()],
            labels: vec!["1".into(), "x".into(), "2x".into()],
        };
        match LeastSquares::new(&d) {
            Err(Error::RankDeficient { index, label }) => {
                assert_eq!(index, 2);
                assert_eq!(label, "2x");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_explanatory_variable_is_dropped() {
        let panels: Vec<SensitivityPanel> = (0..10)
            .map(|i| SensitivityPanel::from_values(i, &[i as f64, 1.0, 2.0, 3.0], &[0.5], 8).unwrap())
            .collect();
        let s: Vec<f64> = (0..10).map(f64::from).collect();
        let out = smooth_panels(
            &panels,
            &BasisSpec::quadratic_with_cross("S", "P"),
            &[s, vec![0.1; 10]],
            &[0.5],
        )
        .unwrap();
        for (a, b) in out.iter().zip(&panels) {
            assert!((a.price - b.price).abs() < 1e-10);
            assert!((a.rho_zero[0] - 3.0).abs() < 1e-10);
        }
    }
}
