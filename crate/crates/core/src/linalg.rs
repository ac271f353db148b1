//! Dense complex matrix helpers shared by the model, the formulations and
//! the post-processing.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn polar(mag: f64, deg: f64) -> Complex64 {
    Complex64::from_polar(mag, deg.to_radians())
}

/// Largest entry of `m - m^H` in modulus.
pub fn hermitian_asymmetry(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of `m - m^T` in modulus.
pub fn symmetric_asymmetry(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}

/// Dense complex Hermitian block (n ≤ 6 in practice).
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMat);

impl Hermitian {
    pub const TOL: f64 = 1e-12;

    /// Accepts `m` if it is Hermitian within [`Hermitian::TOL`] (scaled by its
    /// magnitude) and symmetrizes it exactly.
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "Hermitian block must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = hermitian_asymmetry(&m);
        let scale = m.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        if asym > Self::TOL * scale {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        Ok(Self::symmetrize(m))
    }

    /// `(m + m^H) / 2`, with no tolerance check.
    pub fn symmetrize(m: CMat) -> Self {
        let h = (&m + m.adjoint()).scale(0.5);
        Hermitian(h)
    }

    /// `x x^H`.
    pub fn outer(x: &CVec) -> Self {
        Hermitian(x * x.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn diag_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// Eigenvalues in descending order with matching unit eigenvectors.
    pub fn eigen_desc(&self) -> (Vec<f64>, Vec<CVec>) {
        let eig = SymmetricEigen::new(self.0.clone());
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = idx
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        (values, vectors)
    }
}

/// Rows/columns of `m` picked by `idx` (in that order).
pub fn select(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

pub fn select_vec(v: &[Complex64], idx: &[usize]) -> Vec<Complex64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Hadamard product with a real matrix.
pub fn hadamard_real(m: &CMat, r: &DMatrix<f64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * r[(i, j)])
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_cvec(v: &[Complex64]) -> CVec {
    CVec::from_column_slice(v)
}
