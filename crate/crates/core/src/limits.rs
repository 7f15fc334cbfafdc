//! Limit laws of the standardized sign statistic: spectral weights, the
//! Gaussian quadratic form `Q_p`, the mixed normal / weighted chi-square law
//! `T_∞`, and the fourth-moment ratio κ₄.
//!
//! Samplers here work in `f64`; matrix inputs may be of either scalar type.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::{self, Tolerance};
use crate::scalar::Real;
use crate::scatter::{self, DistributionModel, ScatterSpec};
use crate::sign::SignSummary;

/// Eigen-spectrum of a sign scatter.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralWeights {
    /// Descending, non-negative.
    pub lambda: Vec<f64>,
    /// `λ_i / √τ`; unit Euclidean norm.
    pub alpha: Vec<f64>,
    /// `Σ λ_i² = tr(Σ_U²)`.
    pub tau: f64,
}

impl SpectralWeights {
    /// Eigenvalues are sorted and tiny negative ones (rounding) are clipped to zero.
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("empty spectrum"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("spectrum has non-finite entries"));
        }
        let mut lambda: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
        lambda.sort_by(|a, b| b.total_cmp(a));
        let tau: f64 = lambda.iter().map(|l| l * l).sum();
        if !(tau > 0.0) {
            return Err(Error::domain("tr(Σ_U²) must be positive; spectrum is zero"));
        }
        let root = tau.sqrt();
        let alpha = lambda.iter().map(|l| l / root).collect();
        Ok(Self { lambda, alpha, tau })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// `Σ λ_i`, which is 1 for a sign scatter without zero rows.
    pub fn trace(&self) -> f64 {
        self.lambda.iter().sum()
    }
}

pub fn spectral_weights<T: Real>(sigma_u: ArrayView2<'_, T>) -> Result<SpectralWeights> {
    let eig = linalg::sym_eigen(sigma_u)?;
    SpectralWeights::from_eigenvalues(&eig.values)
}

/// `tr(Σ_U⁴) / tr(Σ_U²)²`; small values mean the standardized statistic is
/// close to normal.
pub fn clt_gate<T: Real>(sigma_u: ArrayView2<'_, T>) -> Result<f64> {
    let w = spectral_weights(sigma_u)?;
    Ok(w.alpha.iter().map(|a| a.powi(4)).sum())
}

/// Draws of `√(1 − Σα²)·Z₀ + Σ α_i (Z_i² − 1)/√2`.
///
/// `alpha` may be a truncation of an infinite weight sequence, in which case
/// the Gaussian term carries the missing mass. `Z₀` is drawn even when its
/// coefficient is zero so the stream layout does not depend on the weights.
pub fn sample_t_infinity<R: Rng + ?Sized>(alpha: &[f64], count: usize, rng: &mut R) -> Result<Vec<f64>> {
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::domain("weights must be finite"));
    }
    let mass: f64 = alpha.iter().map(|a| a * a).sum();
    if mass > 1.0 + 1e-8 {
        return Err(Error::domain(format!("Σα² = {mass} exceeds 1")));
    }
    let gauss = (1.0 - mass).max(0.0).sqrt();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    Ok((0..count)
        .map(|_| {
            let z0: f64 = StandardNormal.sample(rng);
            let chi: f64 = alpha
                .iter()
                .map(|a| {
                    let z: f64 = StandardNormal.sample(rng);
                    a * (z * z - 1.0)
                })
                .sum();
            gauss * z0 + half * chi
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct QpDraws {
    pub values: Vec<f64>,
    /// True when λ did not sum to one and was rescaled first.
    pub rescaled: bool,
}

/// Draws of `Q_p = (Σ λ_i ξ_i² − 1) / √(2τ)`.
pub fn sample_qp<R: Rng + ?Sized>(weights: &SpectralWeights, count: usize, rng: &mut R) -> QpDraws {
    let total = weights.trace();
    let rescaled = (total - 1.0).abs() > 1e-6;
    let scale = if rescaled { 1.0 / total } else { 1.0 };
    let lambda: Vec<f64> = weights.lambda.iter().map(|l| l * scale).collect();
    let denom = (2.0 * weights.tau * scale * scale).sqrt();
    let values = (0..count)
        .map(|_| {
            let q: f64 = lambda
                .iter()
                .map(|l| {
                    let x: f64 = StandardNormal.sample(rng);
                    l * x * x
                })
                .sum();
            (q - 1.0) / denom
        })
        .collect();
    QpDraws { values, rescaled }
}

/// `S_n / √(C(n,2)·τ)` for a known `τ = tr(Σ_U²)`.
pub fn standardized_sn<T: Real>(summary: &SignSummary<T>, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::domain("τ must be positive"));
    }
    let n = summary.n() as f64;
    Ok(summary.sn().to_f64_lossy() / (0.5 * n * (n - 1.0) * tau).sqrt())
}

/// Draws of the Gaussian analogue `T_n^(G)`: the standardized pairwise sum
/// `Σ_{i<j} Y_iᵀY_j` over `n` i.i.d. `N(0, Σ_U)` vectors, computed in the
/// eigenbasis of `Σ_U`.
pub fn sample_gaussian_tn<R: Rng + ?Sized>(
    weights: &SpectralWeights,
    n: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::domain("need n ≥ 2"));
    }
    let roots: Vec<f64> = weights.lambda.iter().map(|l| l.sqrt()).collect();
    let denom = (0.5 * n as f64 * (n as f64 - 1.0) * weights.tau).sqrt();
    let mut sums = vec![0.0; roots.len()];
    Ok((0..count)
        .map(|_| {
            sums.iter_mut().for_each(|s| *s = 0.0);
            let mut sq = 0.0;
            for _ in 0..n {
                for (s, r) in sums.iter_mut().zip(&roots) {
                    let z: f64 = StandardNormal.sample(rng);
                    let y = r * z;
                    *s += y;
                    sq += y * y;
                }
            }
            let total: f64 = sums.iter().map(|s| s * s).sum();
            0.5 * (total - sq) / denom
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Kappa4Method {
    SphericalClosedForm,
    CompoundSymmetricExact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Kappa4Report {
    pub value: f64,
    pub method: Kappa4Method,
    pub stderr: Option<f64>,
    /// `tr(Σ_U²) = E(U₁ᵀU₂)²`, when known.
    pub tau: Option<f64>,
}

/// κ₄ for uniformly distributed signs: `3p/(p+2)`.
pub fn kappa4_spherical(p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::domain("p must be positive"));
    }
    let p = p as f64;
    Ok(3.0 * p / (p + 2.0))
}

/// κ₄ for signs of an elliptical law with compound-symmetric scatter.
///
/// With `γ = ρp/(1−ρ)` and `T ~ Beta(1/2, (p−1)/2)`, the squared projection of
/// a sign on `1/√p` is `A² = (1+γ)T/(1+γT)`. The moments `m₂ = E A²`,
/// `m₄ = E A⁴` are integrated after `T = sin²θ`, which turns the Beta density
/// into `cos^{p−2} θ` and removes both endpoint singularities.
pub fn kappa4_compound_symmetric(p: usize, rho: f64) -> Result<Kappa4Report> {
    if p < 2 {
        return Err(Error::domain("compound symmetry needs p ≥ 2"));
    }
    let lo = -1.0 / (p as f64 - 1.0);
    if !(rho > lo && rho < 1.0) {
        return Err(Error::domain(format!(
            "rho = {rho} outside the admissible interval ({lo}, 1)"
        )));
    }
    let pf = p as f64;
    let gamma = rho * pf / (1.0 - rho);
    let expo = (p - 2) as i32;
    let tol = Tolerance::default();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let a2 = |th: f64| {
        let t = th.sin().powi(2);
        (1.0 + gamma) * t / (1.0 + gamma * t)
    };
    let named = |what: &'static str| move |e: Error| Error::Numeric(format!("integral of {what}: {e}"));
    let norm = quadrature::integrate(|th| th.cos().powi(expo), 0.0, half_pi, tol)
        .map_err(named("the Beta normalizer"))?
        .value;
    let m2 = quadrature::integrate(|th| a2(th) * th.cos().powi(expo), 0.0, half_pi, tol)
        .map_err(named("E A²"))?
        .value
        / norm;
    let m4 = quadrature::integrate(|th| a2(th).powi(2) * th.cos().powi(expo), 0.0, half_pi, tol)
        .map_err(named("E A⁴"))?
        .value
        / norm;
    let q = pf - 1.0;
    let ev2 = m2 * m2 + (1.0 - m2).powi(2) / q;
    let ev4 = m4 * m4 + 6.0 * (m2 - m4).powi(2) / q + 3.0 * (1.0 - 2.0 * m2 + m4).powi(2) / (q * (pf + 1.0));
    Ok(Kappa4Report {
        value: ev4 / (ev2 * ev2),
        method: Kappa4Method::CompoundSymmetricExact,
        stderr: None,
        tau: Some(ev2),
    })
}

const BATCH: usize = 4096;

/// Signs of `count` draws from `model`, centered at its location, in batches.
fn sign_batches<R, F>(
    model: &DistributionModel<f64>,
    scatter: &ScatterSpec<f64>,
    count: usize,
    rng: &mut R,
    mut sink: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(ArrayView2<'_, f64>),
{
    let mut left = count;
    while left > 0 {
        let m = left.min(BATCH);
        let mut x = scatter::sample(model, scatter, m, rng)?.into_inner();
        for mut row in x.axis_iter_mut(Axis(0)) {
            row -= &model.location;
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row /= norm;
            }
        }
        sink(x.view());
        left -= m;
    }
    Ok(())
}

/// Monte Carlo κ₄ from `pairs` independent sign pairs, with a delta-method
/// standard error. Also reports `τ` as the sample mean of `(U₁ᵀU₂)²`.
pub fn kappa4_mc<R: Rng + ?Sized>(
    model: &DistributionModel<f64>,
    scatter: &ScatterSpec<f64>,
    pairs: usize,
    rng: &mut R,
) -> Result<Kappa4Report> {
    if pairs < 2 {
        return Err(Error::domain("need at least two pairs"));
    }
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut left = pairs;
    while left > 0 {
        let m = left.min(BATCH);
        let mut signs = Vec::with_capacity(2);
        for _ in 0..2 {
            sign_batches(model, scatter, m, rng, |u| signs.push(u.to_owned()))?;
        }
        for (u1, u2) in signs[0].axis_iter(Axis(0)).zip(signs[1].axis_iter(Axis(0))) {
            let v = u1.dot(&u2);
            let a = v * v;
            let b = a * a;
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
        left -= m;
    }
    let n = pairs as f64;
    let (ma, mb) = (sa / n, sb / n);
    let var_a = (saa / n - ma * ma) * n / (n - 1.0);
    let var_b = (sbb / n - mb * mb) * n / (n - 1.0);
    let cov = (sab / n - ma * mb) * n / (n - 1.0);
    let value = mb / (ma * ma);
    // gradient of b/a² is (−2b/a³, 1/a²)
    let ga = -2.0 * mb / ma.powi(3);
    let gb = 1.0 / (ma * ma);
    let var = (ga * ga * var_a + 2.0 * ga * gb * cov + gb * gb * var_b) / n;
    Ok(Kappa4Report {
        value,
        method: Kappa4Method::MonteCarlo,
        stderr: Some(var.max(0.0).sqrt()),
        tau: Some(ma),
    })
}

/// Monte Carlo estimate of `Σ_U = E(UUᵀ)` from `count` signs.
pub fn mc_sign_scatter<R: Rng + ?Sized>(
    model: &DistributionModel<f64>,
    scatter: &ScatterSpec<f64>,
    count: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if count == 0 {
        return Err(Error::domain("count must be positive"));
    }
    let p = scatter.dim();
    let mut acc = Array2::<f64>::zeros((p, p));
    sign_batches(model, scatter, count, rng, |u| {
        ndarray::linalg::general_mat_mul(1.0, &u.t(), &u, 1.0, &mut acc);
    })?;
    acc /= count as f64;
    Ok(acc)
}
