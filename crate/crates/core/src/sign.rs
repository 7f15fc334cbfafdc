//! Spatial signs and the statistics built from them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::scatter::Dataset;

/// `x / ‖x‖`, or the zero vector when `x = 0`.
pub fn spatial_sign<T: Real>(x: ArrayView1<'_, T>) -> Array1<T> {
    let norm = x.dot(&x).sqrt();
    if norm > T::zero() {
        x.mapv(|v| v / norm)
    } else {
        Array1::zeros(x.len())
    }
}

/// Sign vectors of one dataset together with the quantities every test needs.
#[derive(Clone, Debug)]
pub struct SignSummary<T> {
    signs: Array2<T>,
    total: Array1<T>,
    gram: Array2<T>,
    sn: T,
    trace2: Option<T>,
    centered: bool,
    zero_rows: Vec<usize>,
}

impl<T: Real> SignSummary<T> {
    /// Builds the summary from rows that are already unit vectors or zero.
    pub fn from_signs(signs: Array2<T>, centered: bool) -> Self {
        let zero_rows: Vec<usize> = signs
            .axis_iter(Axis(0))
            .enumerate()
            .filter(|(_, r)| r.iter().all(|v| *v == T::zero()))
            .map(|(i, _)| i)
            .collect();
        let total = signs.sum_axis(Axis(0));
        let gram = linalg::gram(signs.view());
        let live = T::of_usize(signs.nrows() - zero_rows.len());
        let half = T::lit(0.5);
        let sn = half * (total.dot(&total) - live);
        let trace2 = trace2_from_gram(gram.view()).ok();
        Self {
            signs,
            total,
            gram,
            sn,
            trace2,
            centered,
            zero_rows,
        }
    }

    pub fn n(&self) -> usize {
        self.signs.nrows()
    }

    pub fn p(&self) -> usize {
        self.signs.ncols()
    }

    /// `n × p` matrix with row `i` the sign of observation `i`.
    pub fn signs(&self) -> &Array2<T> {
        &self.signs
    }

    /// `Σ U_i`.
    pub fn total(&self) -> &Array1<T> {
        &self.total
    }

    /// Sign mean `Ū`.
    pub fn mean(&self) -> Array1<T> {
        &self.total / T::of_usize(self.n())
    }

    /// `S_n = Σ_{i<j} U_iᵀU_j`.
    pub fn sn(&self) -> T {
        self.sn
    }

    /// `n × n` matrix of inner products `U_iᵀU_j`.
    pub fn gram(&self) -> &Array2<T> {
        &self.gram
    }

    /// Empirical sign scatter `(1/n) Σ U_i U_iᵀ`.
    pub fn sigma_u(&self) -> Array2<T> {
        self.signs.t().dot(&self.signs) / T::of_usize(self.n())
    }

    /// Leave-two-out estimate of `tr(Σ_U²)`; `None` when `n < 4`.
    pub fn trace2_hat(&self) -> Option<T> {
        self.trace2
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Rows whose observation coincided with the centre.
    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }
}

/// Signs of `X_i − center` (centre defaults to the origin).
pub fn sign_summary<T: Real>(data: &Dataset<T>, center: Option<ArrayView1<'_, T>>) -> Result<SignSummary<T>> {
    let mut signs = data.x().to_owned();
    if let Some(c) = center {
        if c.len() != data.p() {
            return Err(Error::Dimension {
                expected: data.p(),
                actual: c.len(),
            });
        }
        for mut row in signs.axis_iter_mut(Axis(0)) {
            row.zip_mut_with(&c, |v, &m| *v = *v - m);
        }
    }
    for mut row in signs.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > T::zero() {
            row.mapv_inplace(|v| v / norm);
        } else {
            row.fill(T::zero());
        }
    }
    Ok(SignSummary::from_signs(signs, center.is_some()))
}

/// Leave-two-out estimator of `tr(Σ_U²)`:
///
/// `1/(n(n−1)) Σ_{j≠k} (U_j − Ū_(j,k))ᵀU_k · (U_k − Ū_(j,k))ᵀU_j`,
/// `Ū_(j,k) = (Σ_{i≠j,k} U_i)/(n−2)`.
///
/// The result can be negative on degenerate samples and is returned unchanged.
pub fn trace2_estimator<T: Real>(signs: ArrayView2<'_, T>) -> Result<T> {
    trace2_from_gram(linalg::gram(signs).view())
}

fn trace2_from_gram<T: Real>(g: ArrayView2<'_, T>) -> Result<T> {
    let n = g.nrows();
    if n < 4 {
        return Err(Error::domain(format!(
            "trace estimator needs n >= 4 observations, got {n}"
        )));
    }
    // Ū_(j,k)ᵀU_k = (t_k − G_jk − G_kk)/(n−2) with t_k = (Σ_i U_i)ᵀU_k
    let t = g.sum_axis(Axis(0));
    let inv = T::one() / T::of_usize(n - 2);
    let mut acc = T::zero();
    for j in 0..n {
        let gjj = g[[j, j]];
        let mut row = T::zero();
        for k in 0..n {
            if k == j {
                continue;
            }
            let gjk = g[[j, k]];
            let a = gjk - (t[k] - gjk - g[[k, k]]) * inv;
            let b = gjk - (t[j] - gjk - gjj) * inv;
            row = row + a * b;
        }
        acc = acc + row;
    }
    Ok(acc / (T::of_usize(n) * T::of_usize(n - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_data(n: usize, p: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
        Dataset::new(x).unwrap()
    }

    fn pairwise_sn(u: &Array2<f64>) -> f64 {
        let n = u.nrows();
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += u.row(i).dot(&u.row(j));
            }
        }
        s
    }

    /// The estimator written out term by term, leave-two-out means recomputed each time.
    fn literal_trace2(u: &Array2<f64>) -> f64 {
        let (n, p) = u.dim();
        let mut acc = 0.0;
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let mut ubar = vec![0.0; p];
                for i in 0..n {
                    if i != j && i != k {
                        for c in 0..p {
                            ubar[c] += u[[i, c]];
                        }
                    }
                }
                let mut left = 0.0;
                let mut right = 0.0;
                for c in 0..p {
                    let m = ubar[c] / (n - 2) as f64;
                    left += (u[[j, c]] - m) * u[[k, c]];
                    right += (u[[k, c]] - m) * u[[j, c]];
                }
                acc += left * right;
            }
        }
        acc / (n * (n - 1)) as f64
    }

    #[test]
    fn three_four_five() {
        let s = spatial_sign(array![3.0, 4.0].view());
        assert_eq!(s, array![0.6, 0.8]);
    }

    #[test]
    fn zero_maps_to_zero() {
        let s = spatial_sign(array![0.0, 0.0, 0.0].view());
        assert_eq!(s, array![0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn sign_is_unit_and_scale_invariant(
            v in proptest::collection::vec(-100.0f64..100.0, 1..12),
            c in 0.01f64..1000.0,
        ) {
            let x = Array1::from(v);
            prop_assume!(x.iter().any(|a| a.abs() > 1e-6));
            let s = spatial_sign(x.view());
            prop_assert!((s.dot(&s) - 1.0).abs() < 1e-12);
            let sc = spatial_sign((&x * c).view());
            for (a, b) in s.iter().zip(sc.iter()) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identical_signs() {
        let u = array![[1.0, 0.0], [1.0, 0.0]];
        let s = SignSummary::from_signs(u, false);
        assert_abs_diff_eq!(s.sn(), 1.0);
        assert_eq!(s.mean(), array![1.0, 0.0]);
    }

    #[test]
    fn orthogonal_signs() {
        let s = SignSummary::from_signs(Array2::<f64>::eye(3), false);
        assert_abs_diff_eq!(s.sn(), 0.0);
    }

    #[test]
    fn sn_identity_matches_pairwise_sum() {
        for seed in 0..200 {
            let n = 4 + (seed as usize % 20);
            let p = 1 + (seed as usize % 9);
            let d = random_data(n, p, seed);
            let s = sign_summary(&d, None).unwrap();
            let oracle = pairwise_sn(s.signs());
            assert!(
                (s.sn() - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
                "seed {seed}: {} vs {oracle}",
                s.sn()
            );
        }
    }

    #[test]
    fn sn_on_reference_shape() {
        let d = random_data(20, 10, 99);
        let s = sign_summary(&d, None).unwrap();
        let oracle = pairwise_sn(s.signs());
        assert!((s.sn() - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    }

    #[test]
    fn sigma_u_has_unit_trace_and_is_psd() {
        let d = random_data(30, 6, 5);
        let s = sign_summary(&d, None).unwrap();
        let su = s.sigma_u();
        assert_abs_diff_eq!(linalg::trace(su.view()), 1.0, epsilon = 1e-10);
        for i in 0..6 {
            for j in 0..6 {
                assert_abs_diff_eq!(su[[i, j]], su[[j, i]], epsilon = 1e-15);
            }
        }
        let ev = linalg::sym_eigen(su.view()).unwrap().values;
        assert!(ev.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn centring_and_zero_rows() {
        let d =
            Dataset::from_rows(&[vec![1.0, 1.0], vec![2.0, 1.0], vec![1.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let c = array![1.0, 1.0];
        let s = sign_summary(&d, Some(c.view())).unwrap();
        assert!(s.is_centered());
        assert_eq!(s.zero_rows(), &[0]);
        assert_eq!(s.signs().row(1), array![1.0, 0.0]);
        let oracle = pairwise_sn(s.signs());
        assert_abs_diff_eq!(s.sn(), oracle, epsilon = 1e-14);

        let bad = array![1.0];
        assert!(sign_summary(&d, Some(bad.view())).is_err());
    }

    #[test]
    fn trace2_of_single_direction_is_zero() {
        let mut u = Array2::<f64>::zeros((8, 3));
        u.column_mut(0).fill(1.0);
        assert_abs_diff_eq!(trace2_estimator(u.view()).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn trace2_matches_literal_loop() {
        let d = random_data(12, 6, 42);
        let s = sign_summary(&d, None).unwrap();
        let fast = s.trace2_hat().unwrap();
        let slow = literal_trace2(s.signs());
        assert!((fast - slow).abs() <= 1e-10 * slow.abs(), "{fast} vs {slow}");
    }

    #[test]
    fn trace2_needs_four_rows() {
        let u = Array2::<f64>::eye(3);
        assert!(trace2_estimator(u.view()).is_err());
        assert!(SignSummary::from_signs(u, false).trace2_hat().is_none());
    }

    #[test]
    fn trace2_unbiased_on_the_sphere() {
        let (n, p, reps) = (100, 50, 500);
        let mut sum = 0.0;
        for r in 0..reps {
            let d = random_data(n, p, 10_000 + r);
            sum += sign_summary(&d, None).unwrap().trace2_hat().unwrap();
        }
        let mean = sum / reps as f64;
        assert!((mean - 1.0 / p as f64).abs() < 0.1 / p as f64, "mean {mean}");
    }

    #[test]
    fn works_in_f32() {
        let d = Dataset::<f32>::from_rows(&[
            vec![1.0, 2.0],
            vec![-1.0, 0.5],
            vec![0.3, -2.0],
            vec![2.0, 2.0],
            vec![-0.5, -0.5],
        ])
        .unwrap();
        let s = sign_summary(&d, None).unwrap();
        let u64 = s.signs().mapv(|v| v as f64);
        assert!((s.sn() as f64 - pairwise_sn(&u64)).abs() < 1e-5);
        assert!((s.trace2_hat().unwrap() as f64 - literal_trace2(&u64)).abs() < 1e-5);
    }
}
