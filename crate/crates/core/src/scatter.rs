//! Scatter matrices and the three elliptical data generators
//! (normal, multivariate t, two-component scale-mixture normal).

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, RngExt};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Relative symmetry tolerance for user-supplied scatter matrices.
const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues below `-PSD_TOL · λ_max` reject a matrix as not PSD.
const PSD_TOL: f64 = 1e-10;
/// Eigenvalues below `ROOT_CLIP · λ_max` are treated as zero in the square root.
const ROOT_CLIP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum ScatterForm<T> {
    /// `sigma2 · {(1 − rho) I + rho 11ᵀ}`.
    Equicorrelated {
        rho: T,
        sigma2: T,
    },
    General {
        matrix: Array2<T>,
    },
}

#[derive(Clone, Debug)]
pub struct ScatterSpec<T> {
    p: usize,
    form: ScatterForm<T>,
    /// Symmetric square root, only held for the general form.
    root: Option<Array2<T>>,
}

impl<T: Real> ScatterSpec<T> {
    pub fn equicorrelated(p: usize, rho: T, sigma2: T) -> Result<Self> {
        build_equicorrelated(p, rho, sigma2)
    }

    /// Wraps a symmetric positive semidefinite matrix.
    pub fn general(matrix: Array2<T>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r == 0 || r != c {
            return Err(Error::domain(format!(
                "scatter matrix must be square and non-empty, got {r}x{c}"
            )));
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.to_f64_lossy().abs()));
        for i in 0..r {
            for j in 0..i {
                let d = (matrix[[i, j]] - matrix[[j, i]]).to_f64_lossy().abs();
                if d > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::domain(format!(
                        "scatter matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let eig = linalg::sym_eigen(matrix.view())?;
        let lmax = eig.values[0];
        let lmin = *eig.values.last().unwrap();
        if lmax <= 0.0 || lmin < -PSD_TOL * lmax {
            return Err(Error::domain(format!(
                "scatter matrix is not positive semidefinite (eigenvalues {lmin:e} .. {lmax:e})"
            )));
        }
        let root = linalg::sym_sqrt(matrix.view(), ROOT_CLIP)?;
        Ok(Self {
            p: r,
            form: ScatterForm::General { matrix },
            root: Some(root),
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn form(&self) -> &ScatterForm<T> {
        &self.form
    }

    /// Dense `p × p` expansion.
    pub fn dense(&self) -> Array2<T> {
        match &self.form {
            ScatterForm::Equicorrelated { rho, sigma2 } => {
                let off = *sigma2 * *rho;
                let mut m = Array2::from_elem((self.p, self.p), off);
                m.diag_mut().fill(*sigma2);
                m
            }
            ScatterForm::General { matrix } => matrix.clone(),
        }
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        match &self.form {
            ScatterForm::Equicorrelated { rho, sigma2 } => {
                let one = T::one();
                let big = *sigma2 * (one - *rho + T::of_usize(self.p) * *rho);
                let small = *sigma2 * (one - *rho);
                let mut v = vec![big];
                v.extend(std::iter::repeat_n(small, self.p - 1));
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                Ok(v)
            }
            ScatterForm::General { matrix } => Ok(linalg::sym_eigen(matrix.view())?
                .values
                .into_iter()
                .map(T::lit)
                .collect()),
        }
    }

    /// `tr(Σ²)`.
    pub fn trace_sq(&self) -> T {
        match &self.form {
            ScatterForm::Equicorrelated { rho, sigma2 } => {
                let p = T::of_usize(self.p);
                *sigma2 * *sigma2 * (p + p * (p - T::one()) * *rho * *rho)
            }
            ScatterForm::General { matrix } => matrix.iter().map(|&v| v * v).sum(),
        }
    }

    /// Maps rows of standard normals `z` to rows distributed as `N(0, Σ)`.
    fn color_rows(&self, z: &mut Array2<T>) {
        match &self.form {
            ScatterForm::Equicorrelated { rho, sigma2 } => {
                let one = T::one();
                let p = T::of_usize(self.p);
                let sigma = sigma2.sqrt();
                let a = (one - *rho).sqrt();
                let b = ((one - *rho + p * *rho).sqrt() - a) / p;
                for mut row in z.axis_iter_mut(Axis(0)) {
                    let s: T = row.iter().copied().sum();
                    let shift = b * s;
                    row.mapv_inplace(|v| sigma * (a * v + shift));
                }
            }
            ScatterForm::General { .. } => {
                let root = self.root.as_ref().expect("general scatter carries its root");
                // rows are zᵀ, so zᵀR = (Rz)ᵀ with R symmetric
                *z = z.dot(root);
            }
        }
    }
}

impl<T: Real> fmt::Display for ScatterSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            ScatterForm::Equicorrelated { rho, sigma2 } => {
                write!(f, "equicorrelated(p={}, rho={rho}, sigma2={sigma2})", self.p)
            }
            ScatterForm::General { .. } => write!(f, "general(p={})", self.p),
        }
    }
}

/// Builds `sigma2 · {(1 − rho) I + rho 11ᵀ}`, admissible for `−1/(p−1) < rho < 1`.
pub fn build_equicorrelated<T: Real>(p: usize, rho: T, sigma2: T) -> Result<ScatterSpec<T>> {
    if p == 0 {
        return Err(Error::domain("dimension p must be positive"));
    }
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let lower = if p == 1 {
        f64::NEG_INFINITY
    } else {
        -1.0 / (p as f64 - 1.0)
    };
    let r = rho.to_f64_lossy();
    if !(r > lower && r < 1.0) {
        return Err(Error::domain(format!(
            "rho = {r} outside the admissible interval ({lower}, 1) for p = {p}"
        )));
    }
    Ok(ScatterSpec {
        p,
        form: ScatterForm::Equicorrelated { rho, sigma2 },
        root: None,
    })
}

/// Radial family of an elliptical model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family<T> {
    Normal,
    StudentT {
        nu: T,
    },
    /// With probability `weight` the draw comes from `N(μ, scale2 · Σ)`.
    MixtureNormal {
        weight: T,
        scale2: T,
    },
}

impl<T: Real> Family<T> {
    /// The mixture used by the standard design: `0.8 N(0, Σ) + 0.2 N(0, 9Σ)`.
    pub fn reference_mixture() -> Self {
        Family::MixtureNormal {
            weight: T::lit(0.2),
            scale2: T::lit(9.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Normal => Ok(()),
            Family::StudentT { nu } => {
                if nu > T::lit(2.0) && nu.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!(
                        "t degrees of freedom must exceed 2 for a finite covariance, got {nu}"
                    )))
                }
            }
            Family::MixtureNormal { weight, scale2 } => {
                if !(weight >= T::zero() && weight <= T::one()) {
                    return Err(Error::domain(format!(
                        "mixture weight must lie in [0, 1], got {weight}"
                    )));
                }
                if !(scale2 > T::zero()) || !scale2.is_finite() {
                    return Err(Error::domain(format!(
                        "mixture variance inflation must be positive, got {scale2}"
                    )));
                }
                Ok(())
            }
        }
    }
}

impl<T: Real> fmt::Display for Family<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Normal => write!(f, "normal"),
            Family::StudentT { nu } => write!(f, "t:{nu}"),
            Family::MixtureNormal { weight, scale2 } => write!(f, "mixture:{weight}:{scale2}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DistributionModel<T> {
    pub family: Family<T>,
    pub location: Array1<T>,
}

impl<T: Real> DistributionModel<T> {
    pub fn new(family: Family<T>, location: Array1<T>) -> Result<Self> {
        family.validate()?;
        if location.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("location has non-finite entries"));
        }
        Ok(Self { family, location })
    }

    /// Model centred at the origin.
    pub fn centered(family: Family<T>, p: usize) -> Result<Self> {
        Self::new(family, Array1::zeros(p))
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleMeta {
    pub family: String,
    pub scatter: String,
    pub seed: Option<u64>,
}

/// `n × p` observations, one per row.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    x: Array2<T>,
    pub meta: Option<SampleMeta>,
}

impl<T: Real> Dataset<T> {
    pub fn new(x: Array2<T>) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::domain(format!("dataset must be non-empty, got {n}x{p}")));
        }
        if let Some((idx, _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite entry at row {}, column {}",
                idx.0 + 1,
                idx.1 + 1
            )));
        }
        Ok(Self { x, meta: None })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension {
                expected: p,
                actual: rows[bad].len(),
            });
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), p), flat).map_err(|e| Error::domain(e.to_string()))?;
        Self::new(x)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<T> {
        &self.x
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.x.row(i)
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            x: self.x.mapv(|v| v * c),
            meta: self.meta.clone(),
        }
    }

    pub fn into_inner(self) -> Array2<T> {
        self.x
    }
}

/// Draws `n` i.i.d. observations from `model` with scatter `scatter`.
pub fn sample<T, R>(
    model: &DistributionModel<T>,
    scatter: &ScatterSpec<T>,
    n: usize,
    rng: &mut R,
) -> Result<Dataset<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let p = scatter.dim();
    if model.dim() != p {
        return Err(Error::Dimension {
            expected: p,
            actual: model.dim(),
        });
    }
    model.family.validate()?;

    let mut x = Array2::<T>::zeros((n, p));
    let mut radial = vec![T::one(); n];
    for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        radial[i] = radial_factor(&model.family, rng)?;
    }
    scatter.color_rows(&mut x);
    for (mut row, &r) in x.axis_iter_mut(Axis(0)).zip(&radial) {
        row.zip_mut_with(&model.location, |v, &mu| *v = mu + r * *v);
    }
    let mut ds = Dataset::new(x)?;
    ds.meta = Some(SampleMeta {
        family: model.family.to_string(),
        scatter: scatter.to_string(),
        seed: None,
    });
    Ok(ds)
}

/// Per-observation multiplier applied to the Gaussian draw.
fn radial_factor<T, R>(family: &Family<T>, rng: &mut R) -> Result<T>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    Ok(match *family {
        Family::Normal => T::one(),
        Family::StudentT { nu } => {
            let s = chi_square(nu, rng)?;
            (nu / s).sqrt()
        }
        Family::MixtureNormal { weight, scale2 } => {
            if rng.random_bool(weight.to_f64_lossy()) {
                scale2.sqrt()
            } else {
                T::one()
            }
        }
    })
}

/// A χ²_ν draw: a sum of squared normals for small integer ν, gamma sampling otherwise.
fn chi_square<T, R>(nu: T, rng: &mut R) -> Result<T>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    let nu64 = nu.to_f64_lossy();
    if nu64.fract() == 0.0 && nu64 <= 32.0 {
        let k = nu64 as usize;
        Ok((0..k)
            .map(|_| {
                let z: T = StandardNormal.sample(rng);
                z * z
            })
            .sum())
    } else {
        let d = ChiSquared::<f64>::new(nu64).map_err(|e| Error::domain(e.to_string()))?;
        Ok(T::lit(d.sample(rng)))
    }
}

/// The constant `c` with `Cov(X) = c Σ`.
pub fn model_covariance_factor<T: Real>(family: &Family<T>) -> Result<T> {
    family.validate()?;
    Ok(match *family {
        Family::Normal => T::one(),
        Family::StudentT { nu } => nu / (nu - T::lit(2.0)),
        Family::MixtureNormal { weight, scale2 } => (T::one() - weight) + weight * scale2,
    })
}

/// Shift size `δ = 2 √(tr(C²)^{1/2} / (np))`, `C = c Σ` the model covariance;
/// the alternative places the location at `δ·1`.
pub fn power_shift_delta<T: Real>(
    n: usize,
    p: usize,
    scatter: &ScatterSpec<T>,
    family: &Family<T>,
) -> Result<T> {
    if n == 0 || p == 0 {
        return Err(Error::domain("n and p must be positive"));
    }
    if scatter.dim() != p {
        return Err(Error::Dimension {
            expected: p,
            actual: scatter.dim(),
        });
    }
    let c = model_covariance_factor(family)?;
    let tr_c2 = c * c * scatter.trace_sq();
    let np = T::of_usize(n) * T::of_usize(p);
    Ok(T::lit(2.0) * (tr_c2.sqrt() / np).sqrt())
}
