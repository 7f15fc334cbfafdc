//! Small dense linear-algebra helpers. Eigendecompositions go through
//! nalgebra in `f64` regardless of the working scalar.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues in descending order with matching eigenvector columns.
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

pub fn sym_eigen<T: Real>(a: ArrayView2<'_, T>) -> Result<SymEigen> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Dimension {
            expected: r,
            actual: c,
        });
    }
    let m = DMatrix::from_fn(r, c, |i, j| {
        // symmetrize against rounding in the input
        0.5 * (a[[i, j]].to_f64_lossy() + a[[j, i]].to_f64_lossy())
    });
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((r, r), |(i, k)| eig.eigenvectors[(i, order[k])]);
    Ok(SymEigen { values, vectors })
}

/// Symmetric eigen square root `V diag(sqrt(max(λ, 0))) Vᵀ`, clipping
/// eigenvalues below `clip · λ_max` to zero.
pub fn sym_sqrt<T: Real>(a: ArrayView2<'_, T>, clip: f64) -> Result<Array2<T>> {
    let eig = sym_eigen(a)?;
    let lmax = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let roots: Array1<f64> = eig
        .values
        .iter()
        .map(|&l| if l <= clip * lmax { 0.0 } else { l.sqrt() })
        .collect();
    let scaled = &eig.vectors * &roots;
    let root = scaled.dot(&eig.vectors.t());
    Ok(root.mapv(T::lit))
}

/// Row Gram matrix `A Aᵀ`.
pub fn gram<T: Real>(a: ArrayView2<'_, T>) -> Array2<T> {
    a.dot(&a.t())
}

pub fn trace<T: Real>(a: ArrayView2<'_, T>) -> T {
    a.diag().iter().copied().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_is_descending() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let e = sym_eigen(a.view()).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = array![[4.0f64, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let r = sym_sqrt(a.view(), 1e-12).unwrap();
        let back = r.dot(&r);
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sqrt_tolerates_rank_deficiency() {
        let a = array![[1.0f32, 1.0], [1.0, 1.0]];
        let r = sym_sqrt(a.view(), 1e-12).unwrap();
        let back = r.dot(&r);
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-5);
        }
    }
}
