//! Real conic lowering and interior-point solve.

mod clarabel_backend;
mod embed;
mod form;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sdp::ConicProblem;

pub use clarabel_backend::ClarabelSolver;
pub use embed::{hermitian_embedding, svec_order};
pub use form::{cone_violation, encode, Cone, StandardConicForm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Residual threshold for `Solved`; also the interior-point tolerance.
    pub tol: f64,
    /// Residual threshold for `InaccurateSolved`.
    pub inaccurate_tol: f64,
    pub max_iter: u32,
    pub equilibrate: bool,
    pub equilibrate_iters: usize,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            inaccurate_tol: 1e-5,
            max_iter: 200,
            equilibrate: true,
            equilibrate_iters: 25,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatusTag {
    Solved,
    InaccurateSolved,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl StatusTag {
    pub fn has_solution(&self) -> bool {
        matches!(self, StatusTag::Solved | StatusTag::InaccurateSolved)
    }
}

impl fmt::Display for StatusTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StatusTag::Solved => "Solved",
            StatusTag::InaccurateSolved => "Inaccurate/Solved",
            StatusTag::Infeasible => "Infeasible",
            StatusTag::Unbounded => "Unbounded",
            StatusTag::NumericalFailure => "NumericalFailure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStatus {
    pub tag: StatusTag,
    pub iterations: u32,
    /// Relative cone violation of the unscaled primal point.
    pub primal_residual: f64,
    /// Dual residual reported by the backend.
    pub dual_residual: f64,
    pub solve_time_s: f64,
    /// Backend's own status string.
    pub backend_status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    /// Decision vector in the problem's (unscaled) variables.
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Any interior-point method that handles zero, non-negative, second-order
/// and PSD cones.
pub trait ConicSolver {
    fn name(&self) -> &'static str;

    /// Solves `form`; the point is returned whatever the status.
    fn solve(&self, form: &StandardConicForm, settings: &SolverSettings) -> Result<(RawSolution, SolveStatus)>;
}

/// Status from the backend verdict and the measured residual of the
/// unscaled point.
pub fn classify(backend_ok: bool, backend_almost: bool, primal_residual: f64, settings: &SolverSettings) -> StatusTag {
    if backend_ok && primal_residual <= settings.tol {
        StatusTag::Solved
    } else if (backend_ok || backend_almost) && primal_residual <= settings.inaccurate_tol {
        StatusTag::InaccurateSolved
    } else {
        StatusTag::NumericalFailure
    }
}

/// Encodes and solves with the default backend.
pub fn solve_problem(problem: &ConicProblem, settings: &SolverSettings) -> Result<(RawSolution, SolveStatus)> {
    solve_with(&ClarabelSolver, problem, settings)
}

pub fn solve_with(
    solver: &dyn ConicSolver,
    problem: &ConicProblem,
    settings: &SolverSettings,
) -> Result<(RawSolution, SolveStatus)> {
    let form = encode(problem, settings)?;
    solver.solve(&form, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat};
    use crate::sdp::{LinExpr, MatExpr};

    #[test]
    fn trivial_lp() {
        let mut p = ConicProblem::new();
        let x = p.real_var("x").scalar();
        p.add_ge("x>=1", &x - &LinExpr::real(1.0));
        p.add_objective(&x);
        let (sol, st) = solve_problem(&p, &SolverSettings::default()).unwrap();
        assert_eq!(st.tag, StatusTag::Solved);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_pair() {
        let mut p = ConicProblem::new();
        let x = p.real_var("x").scalar();
        p.add_ge("x>=1", &x - &LinExpr::real(1.0));
        p.add_ge("x<=0", -&x);
        p.add_objective(&x);
        let (_, st) = solve_problem(&p, &SolverSettings::default()).unwrap();
        assert_eq!(st.tag, StatusTag::Infeasible);
    }

    #[test]
    fn unbounded_lp() {
        let mut p = ConicProblem::new();
        let x = p.real_var("x").scalar();
        p.add_objective(&x);
        p.add_ge("x<=0", -&x);
        let (_, st) = solve_problem(&p, &SolverSettings::default()).unwrap();
        assert_eq!(st.tag, StatusTag::Unbounded);
    }

    /// min tr(X) s.t. X ⪰ 0, X[0,1] = 1 + i over 2×2 Hermitian X: the
    /// optimum is |X01|·[[1, e^{iθ}],[e^{-iθ}, 1]], trace 2√2.
    fn complex_psd_problem() -> ConicProblem {
        let mut p = ConicProblem::new();
        let x = p.herm_var("X", 2);
        let m = x.expr();
        p.add_eq("off", m.get(0, 1) - &LinExpr::constant(c(1.0, 1.0)));
        p.add_psd("X", m.clone()).unwrap();
        p.add_objective(&m.trace());
        p
    }

    #[test]
    fn complex_psd_optimum() {
        let p = complex_psd_problem();
        let (sol, st) = solve_problem(&p, &SolverSettings::default()).unwrap();
        assert!(st.tag.has_solution(), "{st:?}");
        assert!((sol.objective - 2.0 * 2f64.sqrt()).abs() < 1e-6);
        let x = p.symbol("X").unwrap().expr().eval(&sol.x);
        assert!((x[(0, 0)].re - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn equilibration_does_not_change_the_answer() {
        let mut p = complex_psd_problem();
        // Badly scaled extra constraint.
        let y = p.real_var("y").scalar();
        p.add_ge("y", &y.scaled_real(1e3) - &LinExpr::real(2e3));
        p.add_objective(&y.scaled_real(1e-2));
        let on = SolverSettings::default();
        let off = SolverSettings { equilibrate: false, ..on.clone() };
        let (a, _) = solve_problem(&p, &on).unwrap();
        let (b, _) = solve_problem(&p, &off).unwrap();
        for (x, y) in a.x.iter().zip(&b.x) {
            assert!((x - y).abs() < 1e-6);
        }
        let form = encode(&p, &on).unwrap();
        assert!(form.col_scale.iter().chain(&form.row_scale).all(|&s| s > 0.0));
    }

    #[test]
    fn unscaling_reproduces_residuals() {
        let p = complex_psd_problem();
        let form = encode(&p, &SolverSettings::default()).unwrap();
        let x: Vec<f64> = (0..form.n).map(|k| 0.3 + k as f64).collect();
        let direct = form.slack(&x);
        let (a, b, _) = form.scaled();
        let xs: Vec<f64> = x.iter().zip(&form.col_scale).map(|(x, d)| x / d).collect();
        let mut s = b.clone();
        for &(r, c, v) in &a {
            s[r] -= v * xs[c];
        }
        for (r, (u, sc)) in direct.iter().zip(&s).enumerate() {
            assert!((u - sc / form.row_scale[r]).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_row_becomes_two_real_rows() {
        let mut p = ConicProblem::new();
        let s = p.cmat_var("s", 1, 1).expr();
        p.add_eq("row", s.get(0, 0) - &LinExpr::constant(c(1.0, 2.0)));
        let form = encode(&p, &SolverSettings::default()).unwrap();
        assert_eq!(form.cones, vec![Cone::Zero(2)]);
    }

    #[test]
    fn six_by_six_block_becomes_twelve() {
        let mut p = ConicProblem::new();
        let h = p.herm_var("H", 6).expr();
        p.add_psd("H", h).unwrap();
        let form = encode(&p, &SolverSettings::default()).unwrap();
        assert_eq!(form.cones, vec![Cone::Psd(12)]);
        assert_eq!(form.m(), 78);
    }

    #[test]
    fn svec_matches_backend_convention() {
        // X = [[x0, 1],[1, x1]] ⪰ 0, min x0 + x1 → 2 only if the off-diagonal
        // is read with the expected √2 scaling.
        let mut p = ConicProblem::new();
        let a = p.real_var("a").scalar();
        let b = p.real_var("b").scalar();
        let one = LinExpr::real(1.0);
        let m = MatExpr::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => a.clone(),
            (1, 1) => b.clone(),
            _ => one.clone(),
        });
        p.add_psd("X", m).unwrap();
        p.add_objective(&(&a + &b));
        let (sol, st) = solve_problem(&p, &SolverSettings::default()).unwrap();
        assert!(st.tag.has_solution());
        assert!((sol.objective - 2.0).abs() < 1e-6);
        let _ = CMat::zeros(1, 1);
    }

    #[test]
    fn tightening_threshold_only_demotes() {
        let loose = SolverSettings::default();
        let tight = SolverSettings { tol: 1e-12, ..loose.clone() };
        for r in [0.0, 1e-10, 1e-9, 1e-7, 1e-6, 1e-3] {
            let a = classify(true, false, r, &loose);
            let b = classify(true, false, r, &tight);
            let rank = |t: StatusTag| match t {
                StatusTag::Solved => 0,
                StatusTag::InaccurateSolved => 1,
                _ => 2,
            };
            assert!(rank(b) >= rank(a));
        }
    }
}
