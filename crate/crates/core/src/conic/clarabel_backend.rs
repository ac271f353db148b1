use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::form::StandardConicForm;
use super::{classify, Cone, ConicSolver, RawSolution, SolveStatus, SolverSettings, StatusTag};
use crate::error::{Error, Result};

/// Clarabel interior-point backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver;

fn csc(m: usize, n: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(r, c, v) in triplets {
        if v != 0.0 {
            cols[c].push((r, v));
        }
    }
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval = Vec::with_capacity(triplets.len());
    colptr.push(0);
    for col in &mut cols {
        col.sort_unstable_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(r, v) in col.iter() {
            if last == Some(r) {
                *nzval.last_mut().expect("entry") += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                last = Some(r);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

impl ConicSolver for ClarabelSolver {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, form: &StandardConicForm, settings: &SolverSettings) -> Result<(RawSolution, SolveStatus)> {
        let (a, b, q) = form.scaled();
        let m = form.m();
        let a = csc(m, form.n, &a);
        let p = CscMatrix::<f64>::zeros((form.n, form.n));
        let cones: Vec<SupportedConeT<f64>> = form
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(n) => SupportedConeT::ZeroConeT(n),
                Cone::NonNegative(n) => SupportedConeT::NonnegativeConeT(n),
                Cone::SecondOrder(n) => SupportedConeT::SecondOrderConeT(n),
                Cone::Psd(n) => SupportedConeT::PSDTriangleConeT(n),
            })
            .collect();
        let tol = settings.tol;
        let cfg = DefaultSettingsBuilder::default()
            .verbose(settings.verbose)
            .max_iter(settings.max_iter)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .reduced_tol_gap_abs(settings.inaccurate_tol)
            .reduced_tol_gap_rel(settings.inaccurate_tol)
            .reduced_tol_feas(settings.inaccurate_tol)
            .chordal_decomposition_enable(false)
            .build()
            .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, cfg)
            .map_err(|e| Error::Solver(format!("setup: {e:?}")))?;
        solver.solve();
        let out = &solver.solution;

        let x = form.unscale_x(&out.x);
        let residual = form.primal_residual(&x);
        let tag = match out.status {
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => StatusTag::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => StatusTag::Unbounded,
            s => classify(
                s == SolverStatus::Solved,
                out.r_dual <= settings.inaccurate_tol
                    && matches!(
                    s,
                    SolverStatus::AlmostSolved
                        | SolverStatus::MaxIterations
                        | SolverStatus::InsufficientProgress
                        | SolverStatus::NumericalError
                        | SolverStatus::MaxTime
                ),
                residual,
                settings,
            ),
        };
        let status = SolveStatus {
            tag,
            iterations: out.iterations,
            primal_residual: residual,
            dual_residual: out.r_dual,
            solve_time_s: out.solve_time,
            backend_status: format!("{:?}", out.status),
        };
        let objective = form.objective(&x);
        Ok((RawSolution { x, objective }, status))
    }
}
