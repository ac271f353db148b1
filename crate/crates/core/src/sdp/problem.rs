//! Solver-agnostic conic program over a real decision vector.

use std::collections::BTreeMap;

use super::expr::{LinExpr, MatExpr};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, ZERO};

/// Shape of a named slab of the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    Real,
    /// n×n Hermitian: n diagonal reals, then (re, im) per strict upper entry.
    Hermitian(usize),
    /// r×c complex: (re, im) per entry, row-major.
    Complex(usize, usize),
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Real => 1,
            VarShape::Hermitian(n) => n * n,
            VarShape::Complex(r, c) => 2 * r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarHandle {
    pub offset: usize,
    pub shape: VarShape,
}

impl VarHandle {
    pub fn expr(&self) -> MatExpr {
        match self.shape {
            VarShape::Real => MatExpr::column(vec![LinExpr::var(self.offset)]),
            VarShape::Hermitian(n) => MatExpr::from_fn(n, n, |i, j| {
                if i == j {
                    LinExpr::var(self.offset + i)
                } else {
                    let (k, conj) = herm_slot(n, i, j);
                    let re = self.offset + k;
                    let s = if conj { -1.0 } else { 1.0 };
                    LinExpr { terms: vec![(re, c(1.0, 0.0)), (re + 1, c(0.0, s))], constant: ZERO }
                }
            }),
            VarShape::Complex(r, cols) => MatExpr::from_fn(r, cols, |i, j| {
                let re = self.offset + 2 * (i * cols + j);
                LinExpr { terms: vec![(re, c(1.0, 0.0)), (re + 1, c(0.0, 1.0))], constant: ZERO }
            }),
        }
    }

    pub fn scalar(&self) -> LinExpr {
        LinExpr::var(self.offset)
    }

    /// Writes `value` into the decision vector slab.
    pub fn write(&self, value: &CMat, x: &mut [f64]) {
        match self.shape {
            VarShape::Real => x[self.offset] = value[(0, 0)].re,
            VarShape::Hermitian(n) => {
                for i in 0..n {
                    x[self.offset + i] = value[(i, i)].re;
                    for j in i + 1..n {
                        let (k, _) = herm_slot(n, i, j);
                        let v = 0.5 * (value[(i, j)] + value[(j, i)].conj());
                        x[self.offset + k] = v.re;
                        x[self.offset + k + 1] = v.im;
                    }
                }
            }
            VarShape::Complex(r, cols) => {
                for i in 0..r {
                    for j in 0..cols {
                        let v = value[(i, j)];
                        x[self.offset + 2 * (i * cols + j)] = v.re;
                        x[self.offset + 2 * (i * cols + j) + 1] = v.im;
                    }
                }
            }
        }
    }
}

/// Offset of the (re, im) pair for entry (i, j) of an n×n Hermitian slab,
/// and whether (i, j) is the conjugate (lower) entry.
fn herm_slot(n: usize, i: usize, j: usize) -> (usize, bool) {
    let (a, b, conj) = if i < j { (i, j, false) } else { (j, i, true) };
    // Strict upper entries enumerated row by row.
    let before: usize = (0..a).map(|r| n - r - 1).sum();
    (n + 2 * (before + (b - a - 1)), conj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub expr: LinExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock {
    pub label: String,
    /// Real parts; `exprs[0] ≥ ‖exprs[1..]‖`.
    pub exprs: Vec<LinExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub label: String,
    pub matrix: MatExpr,
}

/// Complex equalities (`expr = 0`), real equalities (`Re expr = 0`),
/// inequalities (`Re expr ≥ 0`), second-order cones and Hermitian PSD
/// blocks, with a real linear objective to minimize.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub n_vars: usize,
    pub symbols: BTreeMap<String, VarHandle>,
    pub eq_complex: Vec<Row>,
    pub eq_real: Vec<Row>,
    pub ineq: Vec<Row>,
    pub socs: Vec<SocBlock>,
    pub psd: Vec<PsdBlock>,
    pub objective: LinExpr,
}

impl ConicProblem {
    pub fn new() -> Self {
        ConicProblem::default()
    }

    fn alloc(&mut self, name: String, shape: VarShape) -> VarHandle {
        let h = VarHandle { offset: self.n_vars, shape };
        self.n_vars += shape.len();
        let prev = self.symbols.insert(name.clone(), h);
        debug_assert!(prev.is_none(), "duplicate symbol {name}");
        h
    }

    pub fn herm_var(&mut self, name: impl Into<String>, n: usize) -> VarHandle {
        self.alloc(name.into(), VarShape::Hermitian(n))
    }

    pub fn cmat_var(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> VarHandle {
        self.alloc(name.into(), VarShape::Complex(rows, cols))
    }

    pub fn real_var(&mut self, name: impl Into<String>) -> VarHandle {
        self.alloc(name.into(), VarShape::Real)
    }

    pub fn symbol(&self, name: &str) -> Option<VarHandle> {
        self.symbols.get(name).copied()
    }

    pub fn add_eq(&mut self, label: impl Into<String>, expr: LinExpr) {
        self.eq_complex.push(Row { label: label.into(), expr: expr.compacted() });
    }

    pub fn add_eq_real(&mut self, label: impl Into<String>, expr: LinExpr) {
        self.eq_real.push(Row { label: label.into(), expr: expr.real_part() });
    }

    /// `Re expr ≥ 0`.
    pub fn add_ge(&mut self, label: impl Into<String>, expr: LinExpr) {
        self.ineq.push(Row { label: label.into(), expr: expr.real_part() });
    }

    /// `lo ≤ Re expr ≤ hi`; infinite sides are skipped.
    pub fn add_range(&mut self, label: &str, expr: &LinExpr, lo: f64, hi: f64) {
        if lo.is_finite() {
            self.add_ge(format!("{label}:lo"), expr - &LinExpr::real(lo));
        }
        if hi.is_finite() {
            self.add_ge(format!("{label}:hi"), &LinExpr::real(hi) - expr);
        }
    }

    /// Entrywise `lhs = rhs` for matrices that are Hermitian by
    /// construction: real rows on the diagonal, complex rows above it.
    pub fn add_herm_eq(&mut self, label: &str, lhs: &MatExpr, rhs: &MatExpr) {
        let d = lhs - rhs;
        for i in 0..d.nrows() {
            self.add_eq_real(format!("{label}[{i},{i}]"), d.get(i, i).clone());
            for j in i + 1..d.ncols() {
                self.add_eq(format!("{label}[{i},{j}]"), d.get(i, j).clone());
            }
        }
    }

    /// Entrywise complex `lhs = rhs`.
    pub fn add_mat_eq(&mut self, label: &str, lhs: &MatExpr, rhs: &MatExpr) {
        let d = lhs - rhs;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                self.add_eq(format!("{label}[{i},{j}]"), d.get(i, j).clone());
            }
        }
    }

    pub fn add_soc(&mut self, label: impl Into<String>, exprs: Vec<LinExpr>) {
        let exprs = exprs.iter().map(|e| e.real_part()).collect();
        self.socs.push(SocBlock { label: label.into(), exprs });
    }

    /// `matrix ⪰ 0`; the matrix must be Hermitian as an expression.
    pub fn add_psd(&mut self, label: impl Into<String>, matrix: MatExpr) -> Result<()> {
        let label = label.into();
        let defect = matrix.hermitian_defect();
        if defect > 1e-14 {
            return Err(Error::NotHermitian { asymmetry: defect });
        }
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension(format!("PSD block `{label}` is not square")));
        }
        self.psd.push(PsdBlock { label, matrix });
        Ok(())
    }

    pub fn add_objective(&mut self, expr: &LinExpr) {
        self.objective += &expr.real_part();
        self.objective.compact();
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x).re
    }

    /// Every equality residual at `x`, labelled.
    pub fn equality_residuals(&self, x: &[f64]) -> Vec<(&str, f64)> {
        let cx = self.eq_complex.iter().map(|r| (r.label.as_str(), r.expr.eval(x).norm()));
        let re = self.eq_real.iter().map(|r| (r.label.as_str(), r.expr.eval(x).re.abs()));
        cx.chain(re).collect()
    }

    pub fn max_equality_residual(&self, x: &[f64]) -> (String, f64) {
        self.equality_residuals(x)
            .into_iter()
            .fold((String::new(), 0.0), |acc, (l, r)| if r > acc.1 { (l.to_string(), r) } else { acc })
    }

    /// Largest violation of an inequality at `x` (0 when all hold).
    pub fn max_inequality_violation(&self, x: &[f64]) -> f64 {
        self.ineq.iter().map(|r| (-r.expr.eval(x).re).max(0.0)).fold(0.0, f64::max)
    }

    /// Checks every expression references an allocated variable.
    pub fn check_indices(&self) -> Result<()> {
        let bad = |e: &LinExpr| e.max_var().is_some_and(|k| k >= self.n_vars);
        let rows = self.eq_complex.iter().chain(&self.eq_real).chain(&self.ineq);
        if rows.clone().any(|r| bad(&r.expr))
            || self.socs.iter().any(|s| s.exprs.iter().any(bad))
            || self.psd.iter().any(|p| p.matrix.entries().any(bad))
            || bad(&self.objective)
        {
            return Err(Error::Dimension("constraint references an unallocated variable".into()));
        }
        Ok(())
    }

    pub fn n_real_equalities(&self) -> usize {
        self.eq_real.len() + 2 * self.eq_complex.len()
    }
}
