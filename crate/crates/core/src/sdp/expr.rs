//! Complex-affine expressions over a real decision vector.
//!
//! Every lifted quantity (Hermitian voltage blocks, complex flow matrices,
//! real dispatches) is stored as real scalars; an entry of a complex matrix
//! is then an affine map `Σ c_k x_k + c0` with complex coefficients.

use std::ops::{Add, AddAssign, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::{CMat, ZERO};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, Complex64)>,
    pub constant: Complex64,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn var(k: usize) -> Self {
        LinExpr { terms: vec![(k, Complex64::new(1.0, 0.0))], constant: ZERO }
    }

    pub fn term(k: usize, coef: Complex64) -> Self {
        LinExpr { terms: vec![(k, coef)], constant: ZERO }
    }

    pub fn constant(c: Complex64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn real(c: f64) -> Self {
        LinExpr::constant(Complex64::new(c, 0.0))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        if c == ZERO {
            return LinExpr::zero();
        }
        LinExpr {
            terms: self.terms.iter().map(|&(k, a)| (k, a * c)).collect(),
            constant: self.constant * c,
        }
    }

    pub fn scaled_real(&self, c: f64) -> Self {
        self.scaled(Complex64::new(c, 0.0))
    }

    /// Complex conjugate; valid because the decision vector is real.
    pub fn conj(&self) -> Self {
        LinExpr {
            terms: self.terms.iter().map(|&(k, a)| (k, a.conj())).collect(),
            constant: self.constant.conj(),
        }
    }

    pub fn real_part(&self) -> Self {
        LinExpr {
            terms: self.terms.iter().map(|&(k, a)| (k, Complex64::new(a.re, 0.0))).collect(),
            constant: Complex64::new(self.constant.re, 0.0),
        }
        .compacted()
    }

    pub fn imag_part(&self) -> Self {
        LinExpr {
            terms: self.terms.iter().map(|&(k, a)| (k, Complex64::new(a.im, 0.0))).collect(),
            constant: Complex64::new(self.constant.im, 0.0),
        }
        .compacted()
    }

    /// Merges repeated variables and drops exact zeros.
    pub fn compacted(mut self) -> Self {
        self.compact();
        self
    }

    pub fn compact(&mut self) {
        if self.terms.len() > 1 {
            self.terms.sort_unstable_by_key(|t| t.0);
            let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(self.terms.len());
            for &(k, a) in &self.terms {
                match out.last_mut() {
                    Some(last) if last.0 == k => last.1 += a,
                    _ => out.push((k, a)),
                }
            }
            self.terms = out;
        }
        self.terms.retain(|t| t.1 != ZERO);
    }

    pub fn has_terms(&self) -> bool {
        !self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == ZERO && self.terms.iter().all(|t| t.1 == ZERO)
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms.iter().fold(self.constant, |acc, &(k, a)| acc + a * x[k])
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.terms.extend_from_slice(&rhs.terms);
        self.constant += rhs.constant;
        if self.terms.len() > 16 {
            self.compact();
        }
    }
}

impl Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out += rhs;
        out.compacted()
    }
}

impl Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out += &-rhs;
        out.compacted()
    }
}

impl Neg for &LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled_real(-1.0)
    }
}

/// Dense matrix of affine expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatExpr {
    rows: usize,
    cols: usize,
    data: Vec<LinExpr>,
}

impl MatExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatExpr { rows, cols, data: vec![LinExpr::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        MatExpr { rows, cols, data }
    }

    pub fn constant(m: &CMat) -> Self {
        MatExpr::from_fn(m.nrows(), m.ncols(), |i, j| LinExpr::constant(m[(i, j)]))
    }

    pub fn column(v: Vec<LinExpr>) -> Self {
        MatExpr { rows: v.len(), cols: 1, data: v }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &LinExpr {
        &self.data[i * self.cols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.data[i * self.cols + j]
    }

    pub fn entries(&self) -> impl Iterator<Item = &LinExpr> {
        self.data.iter()
    }

    /// `C · self`.
    pub fn mul_left(&self, c: &CMat) -> MatExpr {
        assert_eq!(c.ncols(), self.rows, "mul_left dimension");
        MatExpr::from_fn(c.nrows(), self.cols, |i, j| {
            let mut acc = LinExpr::zero();
            for k in 0..self.rows {
                if c[(i, k)] != ZERO {
                    acc += &self.get(k, j).scaled(c[(i, k)]);
                }
            }
            acc.compacted()
        })
    }

    /// `self · C`.
    pub fn mul_right(&self, c: &CMat) -> MatExpr {
        assert_eq!(self.cols, c.nrows(), "mul_right dimension");
        MatExpr::from_fn(self.rows, c.ncols(), |i, j| {
            let mut acc = LinExpr::zero();
            for k in 0..self.cols {
                if c[(k, j)] != ZERO {
                    acc += &self.get(i, k).scaled(c[(k, j)]);
                }
            }
            acc.compacted()
        })
    }

    /// `C · self · C^H`.
    pub fn congruence(&self, c: &CMat) -> MatExpr {
        self.mul_left(c).mul_right(&c.adjoint())
    }

    pub fn adjoint(&self) -> MatExpr {
        MatExpr::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn hadamard_real(&self, r: &DMatrix<f64>) -> MatExpr {
        assert_eq!((r.nrows(), r.ncols()), (self.rows, self.cols), "hadamard dimension");
        MatExpr::from_fn(self.rows, self.cols, |i, j| self.get(i, j).scaled_real(r[(i, j)]))
    }

    pub fn scaled(&self, c: Complex64) -> MatExpr {
        MatExpr::from_fn(self.rows, self.cols, |i, j| self.get(i, j).scaled(c))
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> MatExpr {
        MatExpr::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    /// Principal submatrix on `idx`.
    pub fn principal(&self, idx: &[usize]) -> MatExpr {
        self.submatrix(idx, idx)
    }

    pub fn diag(&self) -> Vec<LinExpr> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i).clone()).collect()
    }

    pub fn trace(&self) -> LinExpr {
        let mut acc = LinExpr::zero();
        for i in 0..self.rows.min(self.cols) {
            acc += self.get(i, i);
        }
        acc.compacted()
    }

    /// `[[a, b], [c, d]]`.
    pub fn block2x2(a: &MatExpr, b: &MatExpr, c: &MatExpr, d: &MatExpr) -> MatExpr {
        assert_eq!(a.rows, b.rows, "block rows");
        assert_eq!(c.rows, d.rows, "block rows");
        assert_eq!(a.cols, c.cols, "block cols");
        assert_eq!(b.cols, d.cols, "block cols");
        MatExpr::from_fn(a.rows + c.rows, a.cols + b.cols, |i, j| {
            match (i < a.rows, j < a.cols) {
                (true, true) => a.get(i, j).clone(),
                (true, false) => b.get(i, j - a.cols).clone(),
                (false, true) => c.get(i - a.rows, j).clone(),
                (false, false) => d.get(i - a.rows, j - a.cols).clone(),
            }
        })
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    /// Largest structural deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self.get(i, j) - &self.get(j, i).conj()).compacted();
                let m = d.terms.iter().map(|t| t.1.norm()).fold(d.constant.norm(), f64::max);
                worst = worst.max(m);
            }
        }
        worst
    }
}

impl Add<&MatExpr> for &MatExpr {
    type Output = MatExpr;
    fn add(self, rhs: &MatExpr) -> MatExpr {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add dimension");
        MatExpr::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + rhs.get(i, j))
    }
}

impl Sub<&MatExpr> for &MatExpr {
    type Output = MatExpr;
    fn sub(self, rhs: &MatExpr) -> MatExpr {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub dimension");
        MatExpr::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - rhs.get(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn sample_x() -> Vec<f64> {
        vec![0.3, -1.2, 2.0, 0.7, -0.4, 1.1]
    }

    fn sample_mat() -> MatExpr {
        MatExpr::from_fn(2, 2, |i, j| {
            let mut e = LinExpr::term(i * 2 + j, c(1.0 + i as f64, j as f64));
            e += &LinExpr::term(4, c(0.5, -0.25));
            e.constant = c(j as f64, 0.1);
            e
        })
    }

    #[test]
    fn algebra_commutes_with_evaluation() {
        let x = sample_x();
        let m = sample_mat();
        let k = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.5), c(-2.0, 0.0)]);
        let mv = m.eval(&x);
        assert!((m.mul_left(&k).eval(&x) - &k * &mv).norm() < 1e-12);
        assert!((m.mul_right(&k).eval(&x) - &mv * &k).norm() < 1e-12);
        assert!((m.adjoint().eval(&x) - mv.adjoint()).norm() < 1e-12);
        assert!((m.congruence(&k).eval(&x) - &k * &mv * k.adjoint()).norm() < 1e-12);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let h = m.hadamard_real(&r).eval(&x);
        assert!((h[(1, 0)] - mv[(1, 0)] * 3.0).norm() < 1e-12);
        assert!(((&m + &m).eval(&x) - mv.scale(2.0)).norm() < 1e-12);
        assert!((&m - &m).eval(&x).norm() < 1e-12);
        assert!((m.trace().eval(&x) - mv.trace()).norm() < 1e-12);
    }

    #[test]
    fn real_and_imag_parts_split() {
        let e = LinExpr { terms: vec![(0, c(1.0, 2.0)), (1, c(-3.0, 0.5))], constant: c(0.2, -0.7) };
        let x = sample_x();
        let v = e.eval(&x);
        assert!((e.real_part().eval(&x).re - v.re).abs() < 1e-14);
        assert!((e.imag_part().eval(&x).re - v.im).abs() < 1e-14);
    }

    #[test]
    fn compaction_merges_and_drops() {
        let mut e = LinExpr::term(3, c(1.0, 0.0));
        e += &LinExpr::term(1, c(2.0, 0.0));
        e += &LinExpr::term(3, c(-1.0, 0.0));
        e.compact();
        assert_eq!(e.terms, vec![(1, c(2.0, 0.0))]);
    }

    #[test]
    fn block_assembly() {
        let a = MatExpr::constant(&CMat::identity(2, 2));
        let b = MatExpr::constant(&CMat::from_element(2, 1, c(0.0, 1.0)));
        let d = MatExpr::constant(&CMat::from_element(1, 1, c(5.0, 0.0)));
        let m = MatExpr::block2x2(&a, &b, &b.adjoint(), &d);
        assert_eq!((m.nrows(), m.ncols()), (3, 3));
        assert_eq!(m.hermitian_defect(), 0.0);
        assert_eq!(m.get(2, 0).constant, c(0.0, -1.0));
    }
}
