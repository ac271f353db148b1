//! Real standard conic form `min qᵀx s.t. b − Ax ∈ K`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::embed::svec_order;
use super::SolverSettings;
use crate::error::{Error, Result};
use crate::sdp::{ConicProblem, LinExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    NonNegative(usize),
    SecondOrder(usize),
    /// Real PSD cone on `n×n` matrices in svec form.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::NonNegative(n) | Cone::SecondOrder(n) => n,
            Cone::Psd(n) => n * (n + 1) / 2,
        }
    }
}

/// Unscaled data plus the equilibration that the backend applies:
/// `x = D x̃`, rows scaled by `E`, one scalar per SOC/PSD block.
#[derive(Debug, Clone)]
pub struct StandardConicForm {
    pub n: usize,
    pub q: Vec<f64>,
    pub q0: f64,
    /// `(row, col, value)` of `A`, no duplicates.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub col_scale: Vec<f64>,
    pub row_scale: Vec<f64>,
}

impl StandardConicForm {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// `A D` and `E` applied: scaled `(A, b, q)`.
    pub fn scaled(&self) -> (Vec<(usize, usize, f64)>, Vec<f64>, Vec<f64>) {
        let a = self
            .a
            .iter()
            .map(|&(r, c, v)| (r, c, v * self.row_scale[r] * self.col_scale[c]))
            .collect();
        let b = self.b.iter().zip(&self.row_scale).map(|(b, e)| b * e).collect();
        let q = self.q.iter().zip(&self.col_scale).map(|(q, d)| q * d).collect();
        (a, b, q)
    }

    pub fn unscale_x(&self, x_scaled: &[f64]) -> Vec<f64> {
        x_scaled.iter().zip(&self.col_scale).map(|(x, d)| x * d).collect()
    }

    /// Slack `b − Ax`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.b.clone();
        for &(r, c, v) in &self.a {
            s[r] -= v * x[c];
        }
        s
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.q0 + self.q.iter().zip(x).map(|(q, x)| q * x).sum::<f64>()
    }

    /// Largest cone violation of `b − Ax` per cone, relative to `1 + ‖b‖∞`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        cone_violation(&self.cones, &self.slack(x)) / (1.0 + self.b.iter().fold(0.0f64, |m, b| m.max(b.abs())))
    }
}

/// Largest violation of membership `s ∈ K`.
pub fn cone_violation(cones: &[Cone], s: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut off = 0;
    for cone in cones {
        let d = cone.dim();
        let blk = &s[off..off + d];
        let v = match *cone {
            Cone::Zero(_) => blk.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            Cone::NonNegative(_) => blk.iter().fold(0.0f64, |m, x| m.max(-x)),
            Cone::SecondOrder(_) => {
                let tail = blk[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                (tail - blk[0]).max(0.0)
            }
            Cone::Psd(n) => {
                let mut m = DMatrix::zeros(n, n);
                for (k, (r, c)) in svec_order(n).into_iter().enumerate() {
                    let val = if r == c { blk[k] } else { blk[k] / std::f64::consts::SQRT_2 };
                    m[(r, c)] = val;
                    m[(c, r)] = val;
                }
                let min = SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                (-min).max(0.0)
            }
        };
        worst = worst.max(v);
        off += d;
    }
    worst
}

struct RowBuilder {
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
}

impl RowBuilder {
    /// Appends the real row `expr` so that the slack equals its value.
    fn push(&mut self, expr: &LinExpr) {
        let r = self.b.len();
        for &(k, coef) in &expr.terms {
            if coef.re != 0.0 {
                self.a.push((r, k, -coef.re));
            }
        }
        self.b.push(expr.constant.re);
    }
}

/// Lowers a [`ConicProblem`] to real standard form and computes the
/// equilibration (identity when `settings.equilibrate` is off).
pub fn encode(problem: &ConicProblem, settings: &SolverSettings) -> Result<StandardConicForm> {
    problem.check_indices()?;
    let mut rows = RowBuilder { a: Vec::new(), b: Vec::new() };
    let mut cones = Vec::new();

    let mut zero = Vec::new();
    for r in &problem.eq_complex {
        zero.push(r.expr.real_part());
        zero.push(r.expr.imag_part());
    }
    for r in &problem.eq_real {
        zero.push(r.expr.real_part());
    }
    let mut n_zero = 0;
    for e in zero {
        if !e.has_terms() {
            if e.constant.re.abs() > 1e-12 {
                return Err(Error::Solver(format!(
                    "structurally inconsistent equality: 0 = {}",
                    -e.constant.re
                )));
            }
            continue;
        }
        rows.push(&e);
        n_zero += 1;
    }
    if n_zero > 0 {
        cones.push(Cone::Zero(n_zero));
    }

    let mut n_nonneg = 0;
    for r in &problem.ineq {
        if !r.expr.has_terms() && r.expr.constant.re >= 0.0 {
            continue;
        }
        rows.push(&r.expr);
        n_nonneg += 1;
    }
    if n_nonneg > 0 {
        cones.push(Cone::NonNegative(n_nonneg));
    }

    for soc in &problem.socs {
        for e in &soc.exprs {
            rows.push(e);
        }
        cones.push(Cone::SecondOrder(soc.exprs.len()));
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    for blk in &problem.psd {
        let n = blk.matrix.nrows();
        let re: Vec<LinExpr> = blk.matrix.entries().map(|e| e.real_part()).collect();
        let im: Vec<LinExpr> = blk.matrix.entries().map(|e| e.imag_part()).collect();
        let at = |r: usize, c: usize| -> LinExpr {
            let (i, j) = (r % n, c % n);
            match (r < n, c < n) {
                (true, true) | (false, false) => re[i * n + j].clone(),
                (true, false) => im[i * n + j].scaled_real(-1.0),
                (false, true) => im[i * n + j].clone(),
            }
        };
        for (r, c) in svec_order(2 * n) {
            let e = at(r, c);
            rows.push(&if r == c { e } else { e.scaled_real(sqrt2) });
        }
        cones.push(Cone::Psd(2 * n));
    }

    let obj = problem.objective.real_part();
    let mut q = vec![0.0; problem.n_vars];
    for &(k, coef) in &obj.terms {
        q[k] += coef.re;
    }
    let mut form = StandardConicForm {
        n: problem.n_vars,
        q,
        q0: obj.constant.re,
        a: rows.a,
        b: rows.b,
        cones,
        col_scale: vec![1.0; problem.n_vars],
        row_scale: Vec::new(),
    };
    form.row_scale = vec![1.0; form.m()];
    if settings.equilibrate {
        equilibrate(&mut form, settings.equilibrate_iters);
    }
    Ok(form)
}

/// Ruiz equilibration of `A`: alternately normalizes column and row
/// infinity norms, keeping one row factor per SOC/PSD block.
fn equilibrate(form: &mut StandardConicForm, iters: usize) {
    const LO: f64 = 1e-4;
    const HI: f64 = 1e4;
    let m = form.m();
    let mut block_of = vec![0usize; m];
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut off = 0;
    for cone in &form.cones {
        let d = cone.dim();
        match cone {
            Cone::Zero(_) | Cone::NonNegative(_) => {
                for r in off..off + d {
                    block_of[r] = blocks.len();
                    blocks.push((r, r + 1));
                }
            }
            _ => {
                for b in block_of.iter_mut().skip(off).take(d) {
                    *b = blocks.len();
                }
                blocks.push((off, off + d));
            }
        }
        off += d;
    }
    let mut d = vec![1.0; form.n];
    let mut e = vec![1.0; m];
    for _ in 0..iters {
        let mut col_max = vec![0.0f64; form.n];
        let mut blk_max = vec![0.0f64; blocks.len()];
        for &(r, c, v) in &form.a {
            let s = (v * e[r] * d[c]).abs();
            col_max[c] = col_max[c].max(s);
            blk_max[block_of[r]] = blk_max[block_of[r]].max(s);
        }
        let mut done = true;
        for (dc, cm) in d.iter_mut().zip(&col_max) {
            if *cm > 0.0 {
                let f = 1.0 / cm.sqrt();
                done &= (f - 1.0).abs() < 1e-3;
                *dc = (*dc * f).clamp(LO, HI);
            }
        }
        for (k, &(lo, hi)) in blocks.iter().enumerate() {
            if blk_max[k] > 0.0 {
                let f = 1.0 / blk_max[k].sqrt();
                done &= (f - 1.0).abs() < 1e-3;
                for x in &mut e[lo..hi] {
                    *x = (*x * f).clamp(LO, HI);
                }
            }
        }
        if done {
            break;
        }
    }
    form.col_scale = d;
    form.row_scale = e;
}
