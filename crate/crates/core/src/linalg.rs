//! Dense complex linear algebra helpers used throughout the crate.
//!
//! Operator norms are largest singular values from a full SVD, inverses go
//! through LU with partial pivoting, and functions of Hermitian matrices go
//! through a full eigendecomposition. Everything here is desk-scale dense
//! arithmetic; there is no iterative path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest singular value of a dense complex matrix.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Smallest singular value of a dense complex matrix.
pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &CMatrix) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Operator-norm distance of `m` from its own adjoint.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    operator_norm(&(m - m.adjoint()))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEig {
    /// Decompose `m`, which must be Hermitian within `tol` in operator norm.
    pub fn new(m: &CMatrix, tol: f64) -> Result<Self> {
        let defect = hermiticity_defect(m);
        if defect > tol {
            return Err(Error::NotHermitian { defect, tol });
        }
        // symmetric_eigen works on the Hermitian part; symmetrize to kill
        // rounding-level asymmetry before factoring.
        let sym = (m + m.adjoint()).scale(0.5);
        let eig = sym.symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Apply a scalar function to the spectrum: V f(Lambda) V^*.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let diag = CVector::from_iterator(self.dim(), self.values.iter().map(|&l| f(l)));
        &self.vectors * CMatrix::from_diagonal(&diag) * self.vectors.adjoint()
    }

    /// (H + shift)^exponent through the spectrum. Requires every shifted
    /// eigenvalue to be strictly positive.
    pub fn shifted_power(&self, shift: f64, exponent: f64) -> Result<CMatrix> {
        if self.values.iter().any(|&l| l + shift <= 0.0) {
            return Err(Error::SpectrumBelowShift);
        }
        Ok(self.map(|l| C64::new((l + shift).powf(exponent), 0.0)))
    }

    /// (H - z)^{-1} through the spectrum.
    pub fn resolvent(&self, z: C64) -> Result<CMatrix> {
        let dist = self.distance_to_spectrum(z);
        if dist <= 1e-8 {
            return Err(Error::ZNearSpectrum { z, dist });
        }
        Ok(self.map(|l| (C64::new(l, 0.0) - z).inv()))
    }

    pub fn distance_to_spectrum(&self, z: C64) -> f64 {
        self.values
            .iter()
            .map(|&l| (C64::new(l, 0.0) - z).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Inverse via LU with partial pivoting.
pub fn lu_inverse(m: &CMatrix) -> Result<CMatrix> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Invalid("matrix is singular to working precision".into()))
}

/// exp(G) for anti-Hermitian G, computed through the Hermitian matrix iG.
/// The result is unitary up to rounding.
pub fn expm_antihermitian(g: &CMatrix) -> Result<CMatrix> {
    let i = C64::new(0.0, 1.0);
    let h = g.map(|x| i * x);
    let eig = HermitianEig::new(&h, 1e-10)?;
    Ok(eig.map(|mu| (-i * C64::new(mu, 0.0)).exp()))
}

/// Identity matrix shorthand.
pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_hermitian() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, -0.5),
                C64::new(0.0, 0.5),
                C64::new(2.0, 0.0),
            ],
        )
    }

    #[test]
    fn eig_reconstructs() {
        let m = small_hermitian();
        let eig = HermitianEig::new(&m, 1e-12).unwrap();
        let recon = eig.map(|l| C64::new(l, 0.0));
        assert!(operator_norm(&(recon - m)) < 1e-12);
        assert!(eig.values[0] <= eig.values[1]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = small_hermitian();
        m[(0, 1)] = C64::new(5.0, 0.0);
        assert!(matches!(
            HermitianEig::new(&m, 1e-10),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn shifted_power_squares_to_shift() {
        let m = small_hermitian();
        let eig = HermitianEig::new(&m, 1e-12).unwrap();
        let half = eig.shifted_power(1.0, 0.5).unwrap();
        let back = &half * &half;
        let expect = &m + identity(2);
        assert!(operator_norm(&(back - expect)) < 1e-12);
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::new(-3.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        assert!((operator_norm(&m) - 3.0).abs() < 1e-14);
        assert!((smallest_singular_value(&m) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn expm_antihermitian_is_unitary() {
        let g = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.3),
                C64::new(0.7, 0.1),
                C64::new(-0.7, 0.1),
                C64::new(0.0, -0.2),
            ],
        );
        let w = expm_antihermitian(&g).unwrap();
        let defect = operator_norm(&(w.adjoint() * &w - identity(2)));
        assert!(defect < 1e-13, "unitarity defect {defect:.3e}");
    }
}
