//! Thin-plate-spline smoother with precomputed coefficient maps.
//!
//! For centres `c_i`, kernel matrix `A_ij = φ(‖c_i − c_j‖)` with
//! `φ(r) = r² ln r²`, affine block `B_i = [1 x_i y_i]` and the QR split
//! `B = [Q₁|Q₂][R₁; 0]`, the penalised fit of responses `f` is
//!
//! ```text
//! a = Q₂ (Q₂ᵀ A Q₂ + mλ I)⁻¹ Q₂ᵀ f = Â f
//! b = R₁⁻¹ Q₁ᵀ (f − A a)          = B̂ f
//! ```
//!
//! Everything except the two matrix–vector products is done once per centre
//! set. Coordinates are mapped affinely onto `[-1, 1]` per axis (using the
//! centres' ranges) before the kernel is evaluated.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of smoother factorisations performed on the current thread.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(Cell::get)
}

/// `r² ln r²` for the distance between `p` and `q`; zero at coincidence.
pub fn tps_kernel(p: (f64, f64), q: (f64, f64)) -> f64 {
    let r2 = (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2);
    if r2 == 0.0 {
        0.0
    } else {
        r2 * r2.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct AxisMap {
    mid: f64,
    half: f64,
}

impl AxisMap {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let half = 0.5 * (hi - lo);
        Self {
            mid: 0.5 * (hi + lo),
            half: if half > 0.0 { half } else { 1.0 },
        }
    }

    fn apply(&self, v: f64) -> f64 {
        (v - self.mid) / self.half
    }
}

/// One Householder reflector `H = I − β v vᵀ` acting on rows `k..`.
#[derive(Debug, Clone)]
struct Reflector {
    k: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    fn apply(&self, x: &mut [f64]) {
        let s: f64 = self.v.iter().zip(&x[self.k..]).map(|(a, b)| a * b).sum();
        let s = self.beta * s;
        for (xi, vi) in x[self.k..].iter_mut().zip(&self.v) {
            *xi -= s * vi;
        }
    }

    /// `H M` for a column-major matrix.
    fn apply_left(&self, m: &mut DMatrix<f64>) {
        for mut col in m.column_iter_mut() {
            self.apply(col.as_mut_slice());
        }
    }

    /// `M H` = `(H Mᵀ)ᵀ`; for symmetric input use together with `apply_left`.
    fn apply_right(&self, m: &mut DMatrix<f64>) {
        let n = m.nrows();
        let mut w = vec![0.0; n];
        for (t, vt) in self.v.iter().enumerate() {
            let col = m.column(self.k + t);
            for (wi, ci) in w.iter_mut().zip(col.iter()) {
                *wi += ci * vt;
            }
        }
        for (t, vt) in self.v.iter().enumerate() {
            let mut col = m.column_mut(self.k + t);
            let f = self.beta * vt;
            for (ci, wi) in col.iter_mut().zip(&w) {
                *ci -= f * wi;
            }
        }
    }
}

/// Householder QR of the `m × 3` affine block, kept as reflectors.
fn householder_qr(b: &mut [Vec<f64>; 3], m: usize) -> Result<(Vec<Reflector>, [[f64; 3]; 3])> {
    let mut refl = Vec::with_capacity(3);
    let mut r = [[0.0; 3]; 3];
    let scale = b.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    for k in 0..3 {
        let x = &b[k][k..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-10 * scale) {
            return Err(Error::DegenerateGeometry);
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        let h = Reflector {
            k,
            beta: if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 },
            v,
        };
        for col in b.iter_mut().skip(k) {
            h.apply(col);
        }
        refl.push(h);
    }
    for i in 0..3 {
        for j in i..3 {
            r[i][j] = b[j][i];
        }
    }
    if (0..3).any(|i| !(r[i][i].abs() > 1e-10 * scale)) || m < 3 {
        return Err(Error::DegenerateGeometry);
    }
    Ok((refl, r))
}

/// Coefficients of one fitted response.
#[derive(Debug, Clone, PartialEq)]
pub struct TpsFit {
    pub a: Vec<f64>,
    pub b: [f64; 3],
}

/// Centres, penalty and the precomputed maps `Â` (f → a) and `B̂` (f → b).
#[derive(Debug, Clone)]
pub struct TpsModel {
    centers: Vec<(f64, f64)>,
    scaled: Vec<(f64, f64)>,
    maps: (AxisMap, AxisMap),
    lambda: f64,
    kernel: DMatrix<f64>,
    a_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
}

impl TpsModel {
    /// Precomputes the smoother for `centers` with penalty weight `lambda`
    /// (the matrix term is `mλI` for `m` centres).
    pub fn precompute(centers: &[(f64, f64)], lambda: f64) -> Result<Self> {
        let m = centers.len();
        if m < 3 {
            return Err(Error::DegenerateGeometry);
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return invalid(format!("smoothing weight must be non-negative, got {lambda}"));
        }
        let maps = (
            AxisMap::new(centers.iter().map(|c| c.0)),
            AxisMap::new(centers.iter().map(|c| c.1)),
        );
        let scaled: Vec<(f64, f64)> = centers.iter().map(|c| (maps.0.apply(c.0), maps.1.apply(c.1))).collect();
        let kernel = DMatrix::from_fn(m, m, |i, j| tps_kernel(scaled[i], scaled[j]));
        let mut b = [
            vec![1.0; m],
            scaled.iter().map(|c| c.0).collect(),
            scaled.iter().map(|c| c.1).collect(),
        ];
        let (refl, r1) = householder_qr(&mut b, m)?;

        // QᵀAQ with Q = H₁H₂H₃.
        let mut c = kernel.clone();
        for h in &refl {
            h.apply_left(&mut c);
            h.apply_right(&mut c);
        }
        let n2 = m - 3;
        let mut inner = c.view((3, 3), (n2, n2)).into_owned();
        for i in 0..n2 {
            inner[(i, i)] += m as f64 * lambda;
        }
        inner = 0.5 * (&inner + inner.transpose());
        let inv = match inner.clone().cholesky() {
            Some(ch) => ch.inverse(),
            None => inner
                .try_inverse()
                .ok_or_else(|| Error::LinearAlgebra("TPS system is singular; are the centres distinct?".into()))?,
        };
        FACTORIZATIONS.with(|f| f.set(f.get() + 1));

        // Â = Q [0 0; 0 inv] Qᵀ
        let mut a_hat = DMatrix::zeros(m, m);
        a_hat.view_mut((3, 3), (n2, n2)).copy_from(&inv);
        for h in refl.iter().rev() {
            h.apply_left(&mut a_hat);
            h.apply_right(&mut a_hat);
        }

        // Columns of Q₁ = Q e_j, j < 3.
        let q1: Vec<Vec<f64>> = (0..3)
            .map(|j| {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                for h in refl.iter().rev() {
                    h.apply(&mut e);
                }
                e
            })
            .collect();
        let q1t = DMatrix::from_fn(3, m, |i, j| q1[i][j]);
        let q1ta = &q1t * &kernel;
        let rhs = &q1t - &q1ta * &a_hat;
        let r1m = DMatrix::from_fn(3, 3, |i, j| r1[i][j]);
        let b_hat = r1m
            .solve_upper_triangular(&rhs)
            .ok_or(Error::DegenerateGeometry)?;
        Ok(Self {
            centers: centers.to_vec(),
            scaled,
            maps,
            lambda,
            kernel,
            a_hat,
            b_hat,
        })
    }

    pub fn centers(&self) -> &[(f64, f64)] {
        &self.centers
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Kernel matrix on the standardized centres.
    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn a_hat(&self) -> &DMatrix<f64> {
        &self.a_hat
    }

    pub fn b_hat(&self) -> &DMatrix<f64> {
        &self.b_hat
    }

    /// Affine block `[1 x y]` on the standardized centres.
    pub fn affine_row(&self, i: usize) -> [f64; 3] {
        [1.0, self.scaled[i].0, self.scaled[i].1]
    }

    /// Two matrix–vector products: `a = Â f`, `b = B̂ f`.
    pub fn fit(&self, f: &[f64]) -> Result<TpsFit> {
        if f.len() != self.len() {
            return invalid(format!("{} responses for {} centres", f.len(), self.len()));
        }
        let f = DVector::from_column_slice(f);
        let a = &self.a_hat * &f;
        let b = &self.b_hat * &f;
        Ok(TpsFit {
            a: a.iter().copied().collect(),
            b: [b[0], b[1], b[2]],
        })
    }

    /// `A a + B b` at the centres.
    pub fn fitted_at_centers(&self, fit: &TpsFit) -> Vec<f64> {
        let a = DVector::from_column_slice(&fit.a);
        let ka = &self.kernel * a;
        (0..self.len())
            .map(|i| {
                let r = self.affine_row(i);
                ka[i] + r[0] * fit.b[0] + r[1] * fit.b[1] + r[2] * fit.b[2]
            })
            .collect()
    }

    /// Kernel expansion at arbitrary points (original coordinates).
    pub fn evaluate(&self, fit: &TpsFit, points: &[(f64, f64)]) -> Vec<f64> {
        points
            .iter()
            .map(|&p| {
                let q = (self.maps.0.apply(p.0), self.maps.1.apply(p.1));
                let k: f64 = self.scaled.iter().zip(&fit.a).map(|(c, a)| a * tps_kernel(q, *c)).sum();
                k + fit.b[0] + fit.b[1] * q.0 + fit.b[2] * q.1
            })
            .collect()
    }

    pub fn evaluator(&self, points: &[(f64, f64)]) -> TpsEvaluator {
        TpsEvaluator::new(self, points)
    }
}

/// Precomputed kernel and affine rows for a fixed set of evaluation points,
/// reusable across every response fitted on the same model.
#[derive(Debug, Clone)]
pub struct TpsEvaluator {
    kernel: DMatrix<f64>,
    affine: DMatrix<f64>,
}

impl TpsEvaluator {
    pub fn new(model: &TpsModel, points: &[(f64, f64)]) -> Self {
        let q: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (model.maps.0.apply(p.0), model.maps.1.apply(p.1)))
            .collect();
        let kernel = DMatrix::from_fn(q.len(), model.len(), |i, j| tps_kernel(q[i], model.scaled[j]));
        let affine = DMatrix::from_fn(q.len(), 3, |i, j| match j {
            0 => 1.0,
            1 => q[i].0,
            _ => q[i].1,
        });
        Self { kernel, affine }
    }

    pub fn evaluate(&self, fit: &TpsFit) -> Vec<f64> {
        let v = &self.kernel * DVector::from_column_slice(&fit.a)
            + &self.affine * DVector::from_column_slice(&fit.b);
        v.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_centers(n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (80.0 + 40.0 * rng.random::<f64>(), rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(tps_kernel((1.0, 1.0), (1.0, 1.0)), 0.0);
        assert_eq!(tps_kernel((0.0, 0.0), (1.0, 0.0)), 0.0);
        assert!((tps_kernel((0.0, 0.0), (0.0, 2.0)) - 4.0 * 4.0_f64.ln()).abs() < 1e-15);
        assert!((tps_kernel((0.0, 0.0), (0.0, 2.0)) - 5.5452).abs() < 5e-5);
    }

    #[test]
    fn three_centres_fit_a_plane() {
        let c = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        let m = TpsModel::precompute(&c, 0.0).unwrap();
        let fit = m.fit(&[1.0, -2.0, 5.0]).unwrap();
        assert!(fit.a.iter().all(|a| a.abs() < 1e-12));
        let v = m.evaluate(&fit, &c);
        for (a, b) in v.iter().zip([1.0, -2.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_centres_are_degenerate() {
        let c = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        assert!(matches!(TpsModel::precompute(&c, 0.1), Err(Error::DegenerateGeometry)));
    }

    #[test]
    fn matches_augmented_block_system() {
        let c = random_centers(10, 1);
        let lambda = 0.03;
        let model = TpsModel::precompute(&c, lambda).unwrap();
        let m = c.len();
        let mut aug = DMatrix::zeros(m + 3, m + 3);
        for i in 0..m {
            for j in 0..m {
                aug[(i, j)] = model.kernel_matrix()[(i, j)];
            }
            aug[(i, i)] += m as f64 * lambda;
            let r = model.affine_row(i);
            for k in 0..3 {
                aug[(i, m + k)] = r[k];
                aug[(m + k, i)] = r[k];
            }
        }
        let inv = aug.try_inverse().unwrap();
        for i in 0..m {
            for j in 0..m {
                assert!((inv[(i, j)] - model.a_hat()[(i, j)]).abs() < 1e-9);
            }
        }
        for k in 0..3 {
            for j in 0..m {
                assert!((inv[(m + k, j)] - model.b_hat()[(k, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_penalty_interpolates() {
        let c = random_centers(25, 2);
        let model = TpsModel::precompute(&c, 0.0).unwrap();
        let f: Vec<f64> = c.iter().map(|p| (p.0 / 10.0).sin() + p.1 * p.1).collect();
        let fit = model.fit(&f).unwrap();
        for (a, b) in model.fitted_at_centers(&fit).iter().zip(&f) {
            assert!((a - b).abs() < 1e-8);
        }
        for (a, b) in model.evaluate(&fit, &c).iter().zip(&f) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn affine_data_has_no_bending() {
        let c = random_centers(30, 3);
        let model = TpsModel::precompute(&c, 0.5 / 30.0).unwrap();
        let f: Vec<f64> = c.iter().map(|p| 2.0 + 0.1 * p.0 - 3.0 * p.1).collect();
        let fit = model.fit(&f).unwrap();
        assert!(fit.a.iter().all(|a| a.abs() < 1e-9));
        let q = [(95.0, 0.1), (130.0, -0.7)];
        for (v, p) in model.evaluate(&fit, &q).iter().zip(q) {
            assert!((v - (2.0 + 0.1 * p.0 - 3.0 * p.1)).abs() < 1e-9);
        }
    }

    #[test]
    fn evaluator_matches_direct_expansion() {
        let c = random_centers(10, 5);
        let model = TpsModel::precompute(&c, 0.01).unwrap();
        let f: Vec<f64> = (0..10).map(|i| (i as f64).cos()).collect();
        let fit = model.fit(&f).unwrap();
        let q = random_centers(5, 6);
        let direct = model.evaluate(&fit, &q);
        let pre = model.evaluator(&q).evaluate(&fit);
        for (a, b) in direct.iter().zip(&pre) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fitting_does_not_refactorize() {
        let c = random_centers(40, 7);
        let before = factorization_count();
        let model = TpsModel::precompute(&c, 0.01).unwrap();
        assert_eq!(factorization_count(), before + 1);
        for s in 0..5 {
            let f: Vec<f64> = (0..40).map(|i| ((i + s) as f64).sin()).collect();
            model.fit(&f).unwrap();
        }
        assert_eq!(factorization_count(), before + 1);
    }

    fn wavy(c: &[(f64, f64)]) -> Vec<f64> {
        c.iter().map(|p| (p.0 / 7.0).sin() + 4.0 * p.1 * p.1 + 0.3 * (13.0 * p.1).cos()).collect()
    }

    fn side_conditions(model: &TpsModel, fit: &TpsFit) -> [f64; 3] {
        let mut s = [0.0; 3];
        for (i, a) in fit.a.iter().enumerate() {
            let r = model.affine_row(i);
            for k in 0..3 {
                s[k] += a * r[k];
            }
        }
        s
    }

    #[test]
    fn q2_is_orthogonal_to_affine_block() {
        // Â B = 0 follows from Q₂ᵀB = 0.
        let c = random_centers(15, 8);
        let model = TpsModel::precompute(&c, 0.02).unwrap();
        for k in 0..3 {
            let col: Vec<f64> = (0..15).map(|i| model.affine_row(i)[k]).collect();
            let a = model.fit(&col).unwrap().a;
            assert!(a.iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn heavy_penalty_approaches_least_squares_plane() {
        let c = random_centers(30, 9);
        let f = wavy(&c);
        let model = TpsModel::precompute(&c, 1e9 / 30.0).unwrap();
        let fit = model.fit(&f).unwrap();
        let x = DMatrix::from_fn(30, 3, |i, k| model.affine_row(i)[k]);
        let y = DVector::from_column_slice(&f);
        let beta = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * y;
        for k in 0..3 {
            assert!((fit.b[k] - beta[k]).abs() < 1e-6, "{k}: {} vs {}", fit.b[k], beta[k]);
        }
    }

    #[test]
    fn rss_grows_with_penalty() {
        let c = random_centers(40, 10);
        let f = wavy(&c);
        let mut last = -1.0;
        for l in [0.0, 1e-4, 1e-2, 1.0, 100.0] {
            let model = TpsModel::precompute(&c, l / 40.0).unwrap();
            let fit = model.fit(&f).unwrap();
            let rss: f64 = model.fitted_at_centers(&fit).iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum();
            assert!(rss >= last - 1e-12, "λ={l}: {rss} < {last}");
            last = rss;
        }
    }

    #[test]
    fn fitted_coefficients_minimise_penalised_objective() {
        let c = random_centers(20, 11);
        let f = wavy(&c);
        let lambda = 0.5 / 20.0;
        let model = TpsModel::precompute(&c, lambda).unwrap();
        let fit = model.fit(&f).unwrap();
        let a_mat = model.kernel_matrix();
        let objective = |a: &[f64]| {
            let av = DVector::from_column_slice(a);
            let ka = a_mat * &av;
            let rss: f64 = (0..20)
                .map(|i| {
                    let r = model.affine_row(i);
                    (f[i] - ka[i] - r[0] * fit.b[0] - r[1] * fit.b[1] - r[2] * fit.b[2]).powi(2)
                })
                .sum();
            rss + 20.0 * lambda * av.dot(&ka)
        };
        let base = objective(&fit.a);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            // Project a random direction onto the null space of Bᵀ.
            let raw: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
            let delta = model.a_hat() * DVector::from_column_slice(&raw);
            let scale = 1e-3 / delta.norm();
            let moved: Vec<f64> = fit.a.iter().zip(delta.iter()).map(|(a, d)| a + scale * d).collect();
            assert!(side_conditions(&model, &TpsFit { a: moved.clone(), b: fit.b }).iter().all(|v| v.abs() < 1e-9));
            assert!(objective(&moved) > base);
        }
    }

    proptest::proptest! {
        #[test]
        fn side_conditions_hold_after_fit(seed in 0u64..1000, l in 0.0f64..2.0) {
            let c = random_centers(25, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let f: Vec<f64> = (0..25).map(|_| 10.0 * (rng.random::<f64>() - 0.5)).collect();
            let model = TpsModel::precompute(&c, l / 25.0).unwrap();
            let fit = model.fit(&f).unwrap();
            let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            for s in side_conditions(&model, &fit) {
                proptest::prop_assert!(s.abs() < 1e-8 * fnorm);
            }
        }
    }
}
