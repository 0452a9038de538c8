use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Affine map of `values` onto `[-1, 1]` (min → −1, max → +1).
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() || !(hi > lo) || !(hi - lo).is_finite() {
        return Err(Error::DegenerateVariable(format!("range [{lo}, {hi}] cannot be standardized")));
    }
    let mid = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    Ok(values
        .iter()
        .map(|&v| ((v - mid) / half).clamp(-1.0, 1.0))
        .collect())
}

/// Polynomials of degree `0..=degree` orthogonal over the point set `x`,
/// built by the three-term recurrence
/// `p_{k+1} = (x − α_k) p_k − β_k p_{k−1}` with
/// `α_k = Σ x p_k² / Σ p_k²`, `β_k = Σ p_k² / Σ p_{k−1}²`.
/// Columns are returned scaled to unit mean square; column-major, one `Vec` per degree.
pub fn forsythe_basis(x: &[f64], degree: usize) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    if degree + 1 > n {
        return Err(Error::RankDeficient {
            index: n,
            label: format!("degree {degree} needs more than {n} points"),
        });
    }
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    let mut norms: Vec<f64> = Vec::with_capacity(degree + 1);
    raw.push(vec![1.0; n]);
    norms.push(n as f64);
    for k in 0..degree {
        let pk = &raw[k];
        let alpha = x.iter().zip(pk).map(|(xi, p)| xi * p * p).sum::<f64>() / norms[k];
        let next: Vec<f64> = if k == 0 {
            x.iter().map(|xi| xi - alpha).collect()
        } else {
            let beta = norms[k] / norms[k - 1];
            let pm = &raw[k - 1];
            x.iter()
                .zip(pk)
                .zip(pm)
                .map(|((xi, p), q)| (xi - alpha) * p - beta * q)
                .collect()
        };
        let norm: f64 = next.iter().map(|v| v * v).sum();
        // Relative to the scale the column would have for well-spread points.
        if !(norm > 1e-24 * norms[k]) {
            return Err(Error::RankDeficient {
                index: k + 1,
                label: format!("degree {} (too few distinct points)", k + 1),
            });
        }
        raw.push(next);
        norms.push(norm);
    }
    Ok(raw
        .into_iter()
        .zip(norms)
        .map(|(col, norm)| {
            let s = (n as f64 / norm).sqrt();
            col.into_iter().map(|v| v * s).collect()
        })
        .collect())
}

/// Tensor-product basis over named explanatory variables: every multi-index
/// `(d_1, …, d_v)` with `d_i ≤ degrees[i]`, restricted to single-variable terms
/// unless cross terms are enabled, and to `max_total_degree` when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub variables: Vec<String>,
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub include_cross_terms: bool,
    #[serde(default)]
    pub max_total_degree: Option<usize>,
}

impl BasisSpec {
    /// `{1, S, P, S², P², S·P}`.
    pub fn quadratic_with_cross(a: &str, b: &str) -> Self {
        Self {
            variables: vec![a.to_string(), b.to_string()],
            degrees: vec![2, 2],
            include_cross_terms: true,
            max_total_degree: Some(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.len() != self.degrees.len() {
            return invalid("one degree per explanatory variable is required");
        }
        Ok(())
    }

    /// Multi-indices in graded order (total degree, then lexicographic).
    pub fn terms(&self) -> Vec<Vec<usize>> {
        let v = self.variables.len();
        let mut out = vec![vec![0; v]];
        let max_total = self.max_total_degree.unwrap_or(usize::MAX);
        let mut idx = vec![0usize; v];
        loop {
            let mut i = 0;
            while i < v {
                idx[i] += 1;
                if idx[i] <= self.degrees[i] {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == v {
                break;
            }
            let total: usize = idx.iter().sum();
            let active = idx.iter().filter(|&&d| d > 0).count();
            if total <= max_total && (self.include_cross_terms || active <= 1) {
                out.push(idx.clone());
            }
        }
        out.sort_by(|a, b| {
            let (ta, tb) = (a.iter().sum::<usize>(), b.iter().sum::<usize>());
            ta.cmp(&tb).then_with(|| b.cmp(a))
        });
        out
    }

    /// Same spec with variable `i` removed.
    pub fn without(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.variables.remove(i);
        s.degrees.remove(i);
        s
    }
}

/// `n × m` design matrix (column-major) with human-readable column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl DesignMatrix {
    /// Standardizes each explanatory series and forms the products of their
    /// Forsythe columns for every basis term.
    pub fn build(spec: &BasisSpec, explanatory: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        if explanatory.len() != spec.variables.len() {
            return invalid(format!(
                "{} explanatory series for {} variables",
                explanatory.len(),
                spec.variables.len()
            ));
        }
        let n = explanatory.first().map_or(0, Vec::len);
        if explanatory.iter().any(|x| x.len() != n) {
            return invalid("explanatory series differ in length");
        }
        let per_var = explanatory
            .iter()
            .zip(&spec.degrees)
            .map(|(x, &d)| forsythe_basis(&standardize(x)?, d))
            .collect::<Result<Vec<_>>>()?;
        let mut columns = Vec::new();
        let mut labels = Vec::new();
        for term in spec.terms() {
            let mut col = vec![1.0; n];
            let mut label = String::new();
            for (v, &d) in term.iter().enumerate() {
                if d == 0 {
                    continue;
                }
                for (c, b) in col.iter_mut().zip(&per_var[v][d]) {
                    *c *= b;
                }
                if !label.is_empty() {
                    label.push('*');
                }
                label.push_str(&spec.variables[v]);
                if d > 1 {
                    label.push_str(&format!("^{d}"));
                }
            }
            labels.push(if label.is_empty() { "1".to_string() } else { label });
            columns.push(col);
        }
        Ok(Self { columns, labels })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(&[2.0, 4.0, 6.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(standardize(&[-1.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(standardize(&[10.0, 15.0, 30.0]).unwrap(), vec![-1.0, -0.5, 1.0]);
        assert!(matches!(standardize(&[3.0, 3.0]), Err(Error::DegenerateVariable(_))));
    }

    /// Gram–Schmidt on monomials, the brute-force reference.
    fn gram_schmidt(x: &[f64], d: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for k in 0..=d {
            let mut v: Vec<f64> = x.iter().map(|xi| xi.powi(k as i32)).collect();
            for q in &out {
                let c = v.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / q.iter().map(|b| b * b).sum::<f64>();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
            out.push(v);
        }
        out
    }

    #[test]
    fn matches_gram_schmidt_up_to_scale() {
        let x = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let f = forsythe_basis(&x, 3).unwrap();
        let g = gram_schmidt(&x, 3);
        for (a, b) in f.iter().zip(&g) {
            let scale = a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>() / b.iter().map(|v| v * v).sum::<f64>();
            for (u, v) in a.iter().zip(b) {
                assert!((u - scale * v).abs() < 1e-12);
            }
        }
        assert!(f[0].iter().all(|&v| (v - 1.0).abs() < 1e-15));
        // Symmetric points: the linear column is proportional to x.
        for (v, xi) in f[1].iter().zip(x) {
            assert!((v - f[1][4] * xi).abs() < 1e-12);
        }
    }

    #[test]
    fn columns_are_orthogonal() {
        let x: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.7).sin()).collect();
        let f = forsythe_basis(&x, 6).unwrap();
        for j in 0..7 {
            for k in 0..j {
                let dot: f64 = f[j].iter().zip(&f[k]).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-8 * 200.0, "{j},{k}: {dot}");
            }
        }
    }

    #[test]
    fn too_high_degree_is_a_rank_error() {
        assert!(matches!(forsythe_basis(&[0.0, 1.0], 2), Err(Error::RankDeficient { .. })));
        assert!(matches!(forsythe_basis(&[0.0, 1.0, 1.0, 0.0], 2), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn asian_basis_terms() {
        let spec = BasisSpec::quadratic_with_cross("S", "P");
        let x = vec![(0..20).map(f64::from).collect::<Vec<_>>(), (0..20).map(|i| ((i * 7) % 20) as f64).collect()];
        let d = DesignMatrix::build(&spec, &x).unwrap();
        assert_eq!(d.labels, vec!["1", "S", "P", "S^2", "S*P", "P^2"]);
        let no_cross = BasisSpec {
            include_cross_terms: false,
            ..spec
        };
        assert_eq!(no_cross.terms().len(), 5);
    }
}
