//! Spatial (geometric) median by the modified Weiszfeld iteration.
//!
//! When an iterate lands on a data point the plain Weiszfeld map is undefined;
//! the Vardi–Zhang step is used instead. With `η` coincident points, `T̃` the
//! Weiszfeld average over the remaining points and `R` their weighted residual,
//! the next iterate is `(1 − η/‖R‖)⁺ T̃ + min(1, η/‖R‖) μ`, and `‖R‖ ≤ η`
//! certifies that the current point is optimal.

use ndarray::{Array1, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scatter::Dataset;

/// Distance below which an iterate is taken to coincide with a data point.
const COINCIDENCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct MedianOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MedianOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

impl MedianOptions {
    /// Defaults with the tolerance raised to what `T` can resolve.
    pub fn for_scalar<T: Real>() -> Self {
        let eps = T::epsilon().to_f64_lossy();
        Self {
            tol: 1e-8f64.max(16.0 * eps),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct MedianResult<T> {
    pub mu_hat: Array1<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Last relative step `‖μ_{t+1} − μ_t‖ / (1 + ‖μ_{t+1}‖)`.
    pub final_step: T,
    /// `Σ‖X_i − μ_t‖` at every visited iterate, starting point included.
    pub objective: Vec<T>,
}

/// Coordinatewise median, the starting point of the iteration.
pub fn coordinatewise_median<T: Real>(data: &Dataset<T>) -> Array1<T> {
    let mut col = Vec::with_capacity(data.n());
    data.x()
        .axis_iter(Axis(1))
        .map(|c| {
            col.clear();
            col.extend(c.iter().copied());
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = col.len() / 2;
            if col.len() % 2 == 1 {
                col[m]
            } else {
                (col[m - 1] + col[m]) * T::lit(0.5)
            }
        })
        .collect()
}

pub fn spatial_median<T: Real>(data: &Dataset<T>, opts: MedianOptions) -> Result<MedianResult<T>> {
    if data.n() == 0 {
        return Err(Error::domain("spatial median of an empty sample"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::domain(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let x = data.x();
    let (n, p) = x.dim();
    let tol = T::lit(opts.tol);
    let coincide = T::lit(COINCIDENCE);

    let mut mu = coordinatewise_median(data);
    let mut dist = vec![T::zero(); n];
    let mut objective = Vec::new();
    let mut final_step = T::infinity();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        for (d, row) in dist.iter_mut().zip(x.axis_iter(Axis(0))) {
            let mut s = T::zero();
            for (a, b) in row.iter().zip(mu.iter()) {
                let t = *a - *b;
                s = s + t * t;
            }
            *d = s.sqrt();
        }
        objective.push(dist.iter().copied().sum());
        if iterations >= opts.max_iter {
            break;
        }

        let mut weighted = Array1::<T>::zeros(p);
        let mut wsum = T::zero();
        let mut eta = 0usize;
        for (row, &d) in x.axis_iter(Axis(0)).zip(&dist) {
            if d < coincide {
                eta += 1;
                continue;
            }
            let w = T::one() / d;
            weighted.scaled_add(w, &row);
            wsum = wsum + w;
        }
        if eta == n {
            // every point sits on the iterate
            final_step = T::zero();
            converged = true;
            break;
        }
        let avg = &weighted / wsum;
        let next = if eta == 0 {
            avg
        } else {
            // R = Σ w_i (x_i − μ) = wsum · (T̃ − μ)
            let resid = (&avg - &mu) * wsum;
            let r = resid.dot(&resid).sqrt();
            let eta = T::of_usize(eta);
            if r <= eta {
                final_step = T::zero();
                converged = true;
                break;
            }
            let keep = (eta / r).min(T::one());
            let pull = (T::one() - eta / r).max(T::zero());
            &avg * pull + &mu * keep
        };
        iterations += 1;
        let diff = &next - &mu;
        let step = diff.dot(&diff).sqrt() / (T::one() + next.dot(&next).sqrt());
        mu = next;
        final_step = step;
        if step <= tol {
            converged = true;
            objective.push(
                x.axis_iter(Axis(0))
                    .map(|row| {
                        let d = &row - &mu;
                        d.dot(&d).sqrt()
                    })
                    .sum(),
            );
            break;
        }
    }

    Ok(MedianResult {
        mu_hat: mu,
        iterations,
        converged,
        final_step,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn objective(x: &Array2<f64>, mu: &[f64]) -> f64 {
        x.axis_iter(Axis(0))
            .map(|r| {
                r.iter()
                    .zip(mu)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum()
    }

    /// Hooke–Jeeves pattern search: derivative-free, independent of Weiszfeld.
    fn pattern_search(x: &Array2<f64>) -> Vec<f64> {
        let p = x.ncols();
        let mut best = x.mean_axis(Axis(0)).unwrap().to_vec();
        let mut fbest = objective(x, &best);
        let mut h = 1.0;
        while h > 1e-10 {
            let mut improved = false;
            for j in 0..p {
                for dir in [1.0, -1.0] {
                    let mut cand = best.clone();
                    cand[j] += dir * h;
                    let f = objective(x, &cand);
                    if f < fbest {
                        best = cand;
                        fbest = f;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best
    }

    fn cloud(n: usize, p: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |(_, j)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * (1.0 + j as f64) + 0.5 * j as f64
        });
        Dataset::new(x).unwrap()
    }

    #[test]
    fn symmetric_cross() {
        let d =
            Dataset::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let m = spatial_median(&d, MedianOptions::default()).unwrap();
        assert!(m.converged);
        assert_abs_diff_eq!(m.mu_hat[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mu_hat[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_is_sample_median() {
        let d = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![10.0]]).unwrap();
        let m = spatial_median(&d, MedianOptions::default()).unwrap();
        assert!(m.converged);
        assert_abs_diff_eq!(m.mu_hat[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn escapes_a_non_optimal_data_point() {
        // coordinatewise median (0, 0) is a data point but not the spatial median
        let d = Dataset::from_rows(&[
            vec![0.0, 0.0],
            vec![10.0, 0.1],
            vec![10.0, -0.1],
            vec![-0.5, 0.0],
            vec![10.0, 0.0],
        ])
        .unwrap();
        let m = spatial_median(&d, MedianOptions::default()).unwrap();
        assert!(m.converged);
        let oracle = pattern_search(d.x());
        assert!(objective(d.x(), m.mu_hat.as_slice().unwrap()) <= objective(d.x(), &oracle) + 1e-8);
        for (a, b) in m.mu_hat.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn matches_derivative_free_minimizer() {
        let d = cloud(50, 5, 3);
        let m = spatial_median(&d, MedianOptions::default()).unwrap();
        assert!(m.converged);
        let oracle = pattern_search(d.x());
        for (a, b) in m.mu_hat.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn objective_never_increases() {
        for seed in 0..30 {
            let d = cloud(20 + seed as usize, 3 + seed as usize % 7, 100 + seed);
            let m = spatial_median(&d, MedianOptions::default()).unwrap();
            for w in m.objective.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "seed {seed}: {} -> {}", w[0], w[1]);
            }
            if m.converged {
                assert!(m.final_step <= 1e-8);
            }
        }
    }

    #[test]
    fn translation_and_scale_equivariance() {
        let d = cloud(40, 6, 7);
        let base = spatial_median(&d, MedianOptions::default()).unwrap().mu_hat;
        let c = 3.25;
        let shifted = Dataset::new(d.x() + c).unwrap();
        let ms = spatial_median(&shifted, MedianOptions::default()).unwrap().mu_hat;
        for (a, b) in ms.iter().zip(base.iter()) {
            assert!((a - (b + c)).abs() < 1e-6);
        }
        let s = 0.37;
        let ms = spatial_median(&d.scaled(s), MedianOptions::default())
            .unwrap()
            .mu_hat;
        for (a, b) in ms.iter().zip(base.iter()) {
            assert!((a - s * b).abs() < 1e-6);
        }
    }

    #[test]
    fn all_points_equal() {
        let d = Dataset::from_rows(&[vec![2.0, 3.0], vec![2.0, 3.0]]).unwrap();
        let m = spatial_median(&d, MedianOptions::default()).unwrap();
        assert!(m.converged);
        assert_eq!(m.mu_hat, array![2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let d = Dataset::from_rows(&[vec![1.0]]).unwrap();
        let opts = MedianOptions {
            tol: 0.0,
            max_iter: 10,
        };
        assert!(spatial_median(&d, opts).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let d = cloud(30, 4, 11);
        let opts = MedianOptions {
            tol: 1e-15,
            max_iter: 2,
        };
        let m = spatial_median(&d, opts).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
    }

    #[test]
    fn f32_converges_with_scalar_tolerance() {
        let d = cloud(30, 4, 12);
        let d32 = Dataset::new(d.x().mapv(|v| v as f32)).unwrap();
        let m = spatial_median(&d32, MedianOptions::for_scalar::<f32>()).unwrap();
        assert!(m.converged);
        let m64 = spatial_median(&d, MedianOptions::default()).unwrap();
        for (a, b) in m.mu_hat.iter().zip(m64.mu_hat.iter()) {
            assert!((*a as f64 - b).abs() < 1e-3);
        }
    }
}
