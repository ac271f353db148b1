//! Physical recovery from relaxed solutions, tightness measures and the
//! head-flow accuracy metric.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;

use crate::conic::{solve_problem, RawSolution, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{c, to_cvec, CMat, CVec, Hermitian};
use crate::network::{FeederModel, Phase, PhaseSet};
use crate::pf::{injections_from_dispatch, Injections, PowerFlowSolution};
use crate::sdp::{build_sdp, BuildOptions, Formulation, ObjectiveSpec, SdpProblem};

/// Default tightness threshold on `λ₂/λ₁`.
pub const RANK1_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rank1Gap {
    /// `λ₂ / λ₁`; zero for an exact rank-one block.
    pub gap: f64,
    /// The block was (numerically) zero and the ratio is undefined.
    pub degenerate: bool,
}

/// Second-largest over largest eigenvalue of a Hermitian PSD block.
/// Errors if the block is clearly indefinite.
pub fn rank1_gap(block: &CMat) -> Result<Rank1Gap> {
    let eigs = Hermitian::new(block.clone())?.eigen_desc().0;
    let top = eigs.first().copied().unwrap_or(0.0);
    if let Some(&min) = eigs.last() {
        if min < -1e-9 * top.max(1.0) {
            return Err(Error::Dimension(format!(
                "block is not positive semidefinite (λ_min = {min:.3e})"
            )));
        }
    }
    Ok(gap_of(&eigs))
}

/// As [`rank1_gap`] but for solver points, which sit inside the cone only
/// up to solver accuracy: negative eigenvalues are clamped to zero.
pub fn rank1_gap_clamped(block: &CMat) -> Rank1Gap {
    gap_of(&Hermitian::symmetrize(block.clone()).eigen_desc().0)
}

fn gap_of(eigs: &[f64]) -> Rank1Gap {
    let top = eigs.first().copied().unwrap_or(0.0);
    if top <= 1e-14 {
        return Rank1Gap { gap: 0.0, degenerate: true };
    }
    let second = eigs.get(1).copied().unwrap_or(0.0).max(0.0);
    Rank1Gap { gap: second / top, degenerate: false }
}

/// A relaxed OPF solution mapped back to the network.
#[derive(Debug, Clone)]
pub struct OpfSolution {
    pub formulation: Formulation,
    pub status: SolveStatus,
    pub bus_ids: Vec<String>,
    pub bus_phases: Vec<PhaseSet>,
    /// Voltage phasors: magnitudes from `sqrt(diag v)`, angles from rank-one
    /// recovery.
    pub voltages: Vec<Vec<Complex64>>,
    pub branch_ids: Vec<String>,
    pub branch_phases: Vec<PhaseSet>,
    /// Sending-end power per branch phase, `diag(S)`.
    pub flows: Vec<Vec<Complex64>>,
    /// Phase-frame `S` and `ℓ` per branch.
    pub s_blocks: Vec<CMat>,
    pub l_blocks: Vec<CMat>,
    /// Recovered branch currents (primary side for regulators).
    pub currents: Vec<Vec<Complex64>>,
    /// Generator output `(P, Q)` per generator phase (p.u.).
    pub dispatch: Vec<Vec<(f64, f64)>>,
    pub source_injection: Vec<Complex64>,
    /// Objective without regularization terms.
    pub objective: f64,
    pub rank1_gaps: Vec<Rank1Gap>,
    /// Every block has gap ≤ [`RANK1_TOL`]; otherwise the point has no
    /// direct physical meaning.
    pub physical: bool,
}

impl OpfSolution {
    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.voltages.iter().map(|v| v.iter().map(|x| x.norm()).collect()).collect()
    }

    pub fn voltage(&self, bus: &str) -> Option<&[Complex64]> {
        let i = self.bus_ids.iter().position(|b| b == bus)?;
        Some(&self.voltages[i])
    }

    /// Magnitude at a bus phase, if both exist.
    pub fn magnitude(&self, bus: &str, phase: Phase) -> Option<f64> {
        let i = self.bus_ids.iter().position(|b| b == bus)?;
        let k = self.bus_phases[i].position(phase)?;
        Some(self.voltages[i][k].norm())
    }

    pub fn branch_flow(&self, id: &str) -> Option<&[Complex64]> {
        let b = self.branch_ids.iter().position(|x| x == id)?;
        Some(&self.flows[b])
    }

    pub fn max_rank1_gap(&self) -> f64 {
        self.rank1_gaps.iter().map(|g| g.gap).fold(0.0, f64::max)
    }

    /// Real power per generator phase in p.u., the shape the power flow
    /// expects.
    pub fn real_dispatch(&self) -> Vec<Vec<f64>> {
        self.dispatch.iter().map(|d| d.iter().map(|x| x.0).collect()).collect()
    }

    /// Bus injections of the dispatch, ready to replay through the oracle.
    pub fn injections(&self, model: &FeederModel) -> Result<Injections> {
        let d: Vec<Vec<Complex64>> =
            self.dispatch.iter().map(|g| g.iter().map(|&(p, q)| c(p, q)).collect()).collect();
        injections_from_dispatch(model, &d)
    }
}

fn principal(block: &CMat) -> CVec {
    let eig = SymmetricEigen::new(block.clone());
    let (k, &lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty block");
    eig.eigenvectors.column(k).into_owned() * Complex64::from(lam.max(0.0).sqrt())
}

/// Phasor recovery along `order` (any order visiting parents first).
///
/// The source takes its pinned phasors. Each branch block's principal
/// eigenvector is rotated to agree with the already recovered upstream
/// voltage, which fixes the branch current; the downstream angle follows
/// from the voltage drop (and ratio for regulators).
pub fn recover_phasors(
    sdp: &SdpProblem,
    model: &FeederModel,
    x: &[f64],
    order: &[usize],
) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let topo = &sdp.topology;
    let mags: Vec<Vec<f64>> = sdp
        .buses
        .iter()
        .map(|b| b.v_phase.eval(x).diagonal().iter().map(|d| d.re.max(0.0).sqrt()).collect())
        .collect();
    let mut v: Vec<Option<Vec<Complex64>>> = vec![None; topo.n_buses()];
    let mut currents = vec![Vec::new(); topo.branches.len()];
    let src = topo.source;
    v[src] = Some(
        model.source.v_ref.iter().zip(&mags[src]).map(|(r, m)| Complex64::from_polar(*m, r.arg())).collect(),
    );
    for &j in order {
        let Some(b) = topo.parent[j] else { continue };
        let br = &topo.branches[b];
        let bv = &sdp.branches[b];
        let vi_known: Vec<Complex64> = {
            let up = v[br.from].as_ref().expect("parents recovered first");
            bv.from_positions.iter().map(|&k| up[k]).collect()
        };
        let n = vi_known.len();
        let vfrom = sdp.buses[br.from].v_phase.principal(&bv.from_positions);
        let block = CMat::from_fn(2 * n, 2 * n, |r, col| {
            match (r < n, col < n) {
                (true, true) => vfrom.get(r, col).eval(x),
                (true, false) => bv.s_phase.get(r, col - n).eval(x),
                (false, true) => bv.s_phase.get(col, r - n).eval(x).conj(),
                (false, false) => bv.l_phase.get(r - n, col - n).eval(x),
            }
        });
        let u = principal(&block);
        let dot: Complex64 = (0..n).map(|k| u[k].conj() * vi_known[k]).sum();
        let rot = if dot.norm() > 0.0 { dot / dot.norm() } else { c(1.0, 0.0) };
        let i: Vec<Complex64> = (n..2 * n).map(|k| u[k] * rot).collect();
        let drop = &br.z * to_cvec(&i);
        let mut vj: Vec<Complex64> = vi_known.iter().zip(drop.iter()).map(|(a, d)| a - d).collect();
        if let Some(r) = &br.ratio {
            for (x, rk) in vj.iter_mut().zip(r) {
                *x *= *rk;
            }
        }
        let to_pos = br.phases.positions_in(topo.bus_phases[j]).expect("checked phases");
        let mut out = vec![c(0.0, 0.0); topo.bus_phases[j].len()];
        for (k, &p) in to_pos.iter().enumerate() {
            out[p] = Complex64::from_polar(mags[j][p], vj[k].arg());
        }
        v[j] = Some(out);
        currents[b] = i;
    }
    (v.into_iter().map(|x| x.unwrap_or_default()).collect(), currents)
}

/// Maps a solver point back to the network.
pub fn extract_solution(
    raw: &RawSolution,
    status: SolveStatus,
    sdp: &SdpProblem,
    model: &FeederModel,
) -> Result<OpfSolution> {
    if !status.tag.has_solution() {
        return Err(Error::Solver(format!("no solution to extract (status {})", status.tag)));
    }
    let x = &raw.x;
    let topo = &sdp.topology;
    let mut rank1_gaps = Vec::with_capacity(sdp.problem.psd.len());
    for blk in &sdp.problem.psd {
        rank1_gaps.push(rank1_gap_clamped(&blk.matrix.eval(x)));
    }
    let physical = rank1_gaps.iter().all(|g| g.gap <= RANK1_TOL);
    let (voltages, currents) = recover_phasors(sdp, model, x, &topo.order);
    let s_blocks: Vec<CMat> = sdp.branches.iter().map(|b| b.s_phase.eval(x)).collect();
    let l_blocks: Vec<CMat> = sdp.branches.iter().map(|b| b.l_phase.eval(x)).collect();
    let flows = s_blocks.iter().map(|s| s.diagonal().iter().copied().collect()).collect();
    let dispatch = sdp
        .generators
        .iter()
        .map(|g| g.p.iter().map(|h| (x[h.offset], x[h.offset] * g.q_ratio)).collect())
        .collect();
    let source_injection = sdp.source_injection.expr().eval(x).iter().copied().collect();
    Ok(OpfSolution {
        formulation: sdp.formulation,
        status,
        bus_ids: topo.bus_ids.clone(),
        bus_phases: topo.bus_phases.clone(),
        voltages,
        branch_ids: topo.branches.iter().map(|b| b.id.clone()).collect(),
        branch_phases: topo.branches.iter().map(|b| b.phases).collect(),
        flows,
        s_blocks,
        l_blocks,
        currents,
        dispatch,
        source_injection,
        objective: sdp.physical_objective(x),
        rank1_gaps,
        physical,
    })
}

/// Builds, solves and extracts one relaxation. The outer error covers
/// assembly and backend failures; the inner `Err` carries the status of a
/// solve without a usable point, such as an infeasible one.
pub fn run_opf(
    model: &FeederModel,
    formulation: Formulation,
    spec: &ObjectiveSpec,
    build: &BuildOptions,
    settings: &SolverSettings,
) -> Result<std::result::Result<OpfSolution, SolveStatus>> {
    let sdp = build_sdp(model, formulation, spec, build)?;
    let (raw, status) = solve_problem(&sdp.problem, settings)?;
    if !status.tag.has_solution() {
        return Ok(Err(status));
    }
    Ok(Ok(extract_solution(&raw, status, &sdp, model)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowErrorReport {
    pub segment: String,
    pub phases: Vec<char>,
    /// `|P_SDP − P_ref| / |P_ref| · 100` per phase.
    pub p_error_pct: Vec<f64>,
    pub q_error_pct: Vec<f64>,
    /// Phases whose reference was below 1e-9 in magnitude; the value is
    /// then the absolute difference, not a percentage.
    pub p_absolute: Vec<bool>,
    pub q_absolute: Vec<bool>,
}

fn pct(got: f64, want: f64) -> (f64, bool) {
    if want.abs() < 1e-9 {
        ((got - want).abs(), true)
    } else {
        ((got - want).abs() / want.abs() * 100.0, false)
    }
}

/// Absolute percentage error of head flows against the oracle.
pub fn flow_error(sdp: &OpfSolution, oracle: &PowerFlowSolution, segment: &str) -> Result<FlowErrorReport> {
    let unknown = || Error::UnknownId { kind: "segment", id: segment.to_string() };
    let b = sdp.branch_ids.iter().position(|x| x == segment).ok_or_else(unknown)?;
    let ob = oracle.branch_ids.iter().position(|x| x == segment).ok_or_else(unknown)?;
    let (got, want) = (&sdp.flows[b], &oracle.flows[ob]);
    if got.len() != want.len() {
        return Err(Error::Dimension(format!("segment `{segment}` phase count differs")));
    }
    let mut rep = FlowErrorReport {
        segment: segment.to_string(),
        phases: sdp.branch_phases[b].iter().map(|p| p.letter()).collect(),
        p_error_pct: Vec::new(),
        q_error_pct: Vec::new(),
        p_absolute: Vec::new(),
        q_absolute: Vec::new(),
    };
    for (g, w) in got.iter().zip(want) {
        let (p, pa) = pct(g.re, w.re);
        let (q, qa) = pct(g.im, w.im);
        rep.p_error_pct.push(p);
        rep.q_error_pct.push(q);
        rep.p_absolute.push(pa);
        rep.q_absolute.push(qa);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::polar;

    #[test]
    fn outer_product_has_zero_gap() {
        let x = to_cvec(&[c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0)]);
        let g = rank1_gap(&(&x * x.adjoint())).unwrap();
        assert!(g.gap < 1e-15 && !g.degenerate);
    }

    #[test]
    fn identity_gap_is_one() {
        assert!((rank1_gap(&CMat::identity(2, 2)).unwrap().gap - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_gap() {
        let m = CMat::from_diagonal(&to_cvec(&[c(1.0, 0.0), c(1e-7, 0.0)]));
        assert!((rank1_gap(&m).unwrap().gap - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn zero_block_is_flagged() {
        let g = rank1_gap(&CMat::zeros(3, 3)).unwrap();
        assert_eq!(g, Rank1Gap { gap: 0.0, degenerate: true });
    }

    #[test]
    fn percentage_error() {
        let (e, abs) = pct(100.1, 100.0);
        assert!((e - 0.1).abs() < 1e-9 && !abs);
        assert_eq!(pct(5.0, 5.0), (0.0, false));
        assert_eq!(pct(1e-3, 0.0), (1e-3, true));
        let _ = polar(1.0, 0.0);
    }
}
