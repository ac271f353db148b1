//! Semidefinite relaxations of branch-flow OPF on radial feeders.
//!
//! Two formulations share one assembly path. The phase-frame relaxation
//! lifts every branch to `[[v_i, S], [S^H, ℓ]] ⪰ 0`. The symmetrical
//! relaxation keeps the three-phase backbone in sequence components and
//! bridges to reduced-phase laterals through an auxiliary phase-frame
//! voltage block at each boundary bus.

mod dg;
mod expr;
mod objective;
mod problem;
mod regulator;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{to_cvec, CMat, Hermitian};
use crate::network::{radial_order, validate_feeder, BranchKind, FeederModel, TopologyOrder};
use crate::pf::{bus_load_draw, flat_start, PowerFlowSolution};
use crate::symcomp::fortescue_matrix;

pub use dg::{dg_constraints, GenVars};
pub use expr::{LinExpr, MatExpr};
pub use objective::{build_objective, ObjectiveKind, ObjectiveSpec};
pub use problem::{ConicProblem, PsdBlock, Row, SocBlock, VarHandle, VarShape};
pub use regulator::{kvl_rhs, ratio_matrix, regulator_constraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// Phase-frame branch flow model throughout.
    Bfm,
    /// Sequence frame on the three-phase backbone, phase frame on laterals.
    Symmetrical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Phase,
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// `vmin² ≤ diag(v) ≤ vmax²` at every bus except the source.
    Enforce,
    /// No voltage bounds.
    Relax,
}

/// Per-bus, per-phase constant load power (p.u.) used by one SDP solve.
pub type LoadProfile = Vec<Vec<Complex64>>;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub bounds: BoundMode,
    /// Buses whose voltage bounds are not enforced.
    pub exempt: Vec<String>,
    /// Load power per bus; `None` evaluates every load at nominal voltage.
    pub loads: Option<LoadProfile>,
    /// Weight of `tr(ℓ)` on zero-impedance branches; `None` picks a
    /// default scaled to the objective.
    pub zero_impedance_weight: Option<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { bounds: BoundMode::Enforce, exempt: Vec::new(), loads: None, zero_impedance_weight: None }
    }
}

#[derive(Debug, Clone)]
pub struct BusVars {
    pub frame: Frame,
    /// `v` (phase frame) or `v012` (sequence frame).
    pub v: VarHandle,
    /// Phase-frame copy at a backbone bus feeding laterals.
    pub aux: Option<VarHandle>,
    /// Phase-frame voltage block as an expression.
    pub v_phase: MatExpr,
}

#[derive(Debug, Clone)]
pub struct BranchVars {
    pub frame: Frame,
    pub s: VarHandle,
    pub l: VarHandle,
    /// Phase-frame `S` and `ℓ`.
    pub s_phase: MatExpr,
    pub l_phase: MatExpr,
    /// Index into `problem.psd`.
    pub psd: usize,
    /// Branch positions within the from-bus phase set.
    pub from_positions: Vec<usize>,
}

/// An assembled relaxation together with the map from network elements to
/// decision variables.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub formulation: Formulation,
    pub problem: ConicProblem,
    pub topology: TopologyOrder,
    pub buses: Vec<BusVars>,
    pub branches: Vec<BranchVars>,
    pub generators: Vec<GenVars>,
    /// Complex power bought at the source bus, per source phase.
    pub source_injection: VarHandle,
    pub loads: LoadProfile,
    /// Buses carrying a phase-frame auxiliary block.
    pub boundary_buses: Vec<usize>,
    /// Objective part that is not physical (zero-impedance regularization).
    pub regularization: LinExpr,
}

/// Load power at nominal (flat-start) voltages.
pub fn nominal_loads(model: &FeederModel) -> Result<LoadProfile> {
    let topo = radial_order(model)?;
    let v = flat_start(model, &topo);
    Ok(bus_load_draw(model, &v)?.0)
}

/// Backbone rule: both ends and the branch carry all three phases and every
/// ancestor branch is backbone.
pub fn backbone_branches(topo: &TopologyOrder) -> Vec<bool> {
    let mut out = vec![false; topo.branches.len()];
    for &bus in &topo.order {
        let Some(b) = topo.parent[bus] else { continue };
        let br = &topo.branches[b];
        let upstream_ok = match topo.parent[br.from] {
            None => true,
            Some(pb) => out[pb],
        };
        out[b] = upstream_ok
            && br.phases.is_three_phase()
            && topo.bus_phases[br.from].is_three_phase()
            && topo.bus_phases[br.to].is_three_phase();
    }
    out
}

pub fn build_bfm_sdp(model: &FeederModel, spec: &ObjectiveSpec, opts: &BuildOptions) -> Result<SdpProblem> {
    build_sdp(model, Formulation::Bfm, spec, opts)
}

pub fn build_symmetrical_sdp(
    model: &FeederModel,
    spec: &ObjectiveSpec,
    opts: &BuildOptions,
) -> Result<SdpProblem> {
    build_sdp(model, Formulation::Symmetrical, spec, opts)
}

pub fn build_sdp(
    model: &FeederModel,
    formulation: Formulation,
    spec: &ObjectiveSpec,
    opts: &BuildOptions,
) -> Result<SdpProblem> {
    let report = validate_feeder(model);
    if let Some(issue) = report.issues.first() {
        return Err(Error::InvalidModel(issue.to_string()));
    }
    if model.units != crate::network::Units::PerUnit {
        return Err(Error::InvalidModel("SDP assembly expects a per-unit model".into()));
    }
    let topo = radial_order(model)?;
    let n_bus = topo.n_buses();
    let loads = match &opts.loads {
        Some(l) => l.clone(),
        None => nominal_loads(model)?,
    };
    if loads.len() != n_bus || loads.iter().zip(&topo.bus_phases).any(|(l, p)| l.len() != p.len()) {
        return Err(Error::Dimension("load profile must match bus phases".into()));
    }

    let a = fortescue_matrix();
    let backbone = match formulation {
        Formulation::Bfm => vec![false; topo.branches.len()],
        Formulation::Symmetrical => backbone_branches(&topo),
    };
    let mut p = ConicProblem::new();

    // Bus voltage blocks.
    let mut seq_bus = vec![false; n_bus];
    for (b, br) in topo.branches.iter().enumerate() {
        if backbone[b] {
            seq_bus[br.from] = true;
            seq_bus[br.to] = true;
        }
    }
    let mut buses = Vec::with_capacity(n_bus);
    let mut boundary_buses = Vec::new();
    for i in 0..n_bus {
        let id = &topo.bus_ids[i];
        let n = topo.bus_phases[i].len();
        if seq_bus[i] {
            let v = p.herm_var(format!("v012:{id}"), 3);
            let feeds_lateral = topo.children[i].iter().any(|&c| !backbone[c]);
            let (aux, v_phase) = if feeds_lateral {
                let aux = p.herm_var(format!("vabc:{id}"), 3);
                p.add_herm_eq(&format!("aux {id}"), &aux.expr(), &v.expr().congruence(&a));
                boundary_buses.push(i);
                (Some(aux), aux.expr())
            } else {
                (None, v.expr().congruence(&a))
            };
            buses.push(BusVars { frame: Frame::Sequence, v, aux, v_phase });
        } else {
            let v = p.herm_var(format!("v:{id}"), n);
            buses.push(BusVars { frame: Frame::Phase, v, aux: None, v_phase: v.expr() });
        }
    }

    // Source pin.
    let src = topo.source;
    let v_ref = to_cvec(&model.source.v_ref);
    if v_ref.len() != topo.bus_phases[src].len() {
        return Err(Error::Dimension("source phasors must match source bus phases".into()));
    }
    let pin = Hermitian::outer(&v_ref).into_matrix();
    let pin = match buses[src].frame {
        Frame::Phase => pin,
        Frame::Sequence => a.adjoint() * pin * &a,
    };
    p.add_herm_eq("source", &buses[src].v.expr(), &MatExpr::constant(&pin));

    // Branch blocks, KVL / regulator coupling and PSD cones.
    let mut branches = Vec::with_capacity(topo.branches.len());
    for (b, br) in topo.branches.iter().enumerate() {
        let n = br.phases.len();
        let from_positions = br
            .phases
            .positions_in(topo.bus_phases[br.from])
            .ok_or_else(|| Error::InvalidModel(format!("branch `{}` phases", br.id)))?;
        let frame = if backbone[b] { Frame::Sequence } else { Frame::Phase };
        let (s, l) = match frame {
            Frame::Sequence => (p.cmat_var(format!("S012:{}", br.id), 3, 3), p.herm_var(format!("l012:{}", br.id), 3)),
            Frame::Phase => (p.cmat_var(format!("S:{}", br.id), n, n), p.herm_var(format!("l:{}", br.id), n)),
        };
        let (v_from, v_to, z) = match frame {
            Frame::Sequence => (buses[br.from].v.expr(), buses[br.to].v.expr(), a.adjoint() * &br.z * &a),
            Frame::Phase => (
                buses[br.from].v_phase.principal(&from_positions),
                buses[br.to].v_phase.clone(),
                br.z.clone(),
            ),
        };
        let rhs = match br.kind {
            BranchKind::Line => kvl_rhs(&v_from, &s.expr(), &l.expr(), &z),
            BranchKind::Regulator => {
                regulator_constraint(&model.regulators[br.element], frame, &v_from, &s.expr(), &l.expr(), &z)?
            }
        };
        p.add_herm_eq(&format!("kvl {}", br.id), &v_to, &rhs);
        let block = MatExpr::block2x2(&v_from, &s.expr(), &s.expr().adjoint(), &l.expr());
        let psd = p.psd.len();
        p.add_psd(format!("psd {}", br.id), block)?;
        let (s_phase, l_phase) = match frame {
            Frame::Sequence => (s.expr().congruence(&a), l.expr().congruence(&a)),
            Frame::Phase => (s.expr(), l.expr()),
        };
        branches.push(BranchVars { frame, s, l, s_phase, l_phase, psd, from_positions });
    }

    // Generators.
    let mut generators = Vec::with_capacity(model.generators.len());
    for (g, gen) in model.generators.iter().enumerate() {
        let bus = topo.bus(&gen.bus).ok_or_else(|| Error::UnknownId { kind: "bus", id: gen.bus.clone() })?;
        let positions = gen
            .phases
            .positions_in(topo.bus_phases[bus])
            .ok_or_else(|| Error::InvalidModel(format!("generator `{}` phases", gen.id)))?;
        generators.push(dg_constraints(&mut p, g, gen, bus, positions)?);
    }

    // Power balance per bus and phase.
    let source_injection = p.cmat_var("s0", topo.bus_phases[src].len(), 1);
    for j in 0..n_bus {
        let n = topo.bus_phases[j].len();
        let mut rows: Vec<LinExpr> = (0..n).map(|k| LinExpr::constant(-loads[j][k])).collect();
        if j == src {
            let s0 = source_injection.expr();
            for (k, row) in rows.iter_mut().enumerate() {
                *row += s0.get(k, 0);
            }
        }
        for g in generators.iter().filter(|g| g.bus == j) {
            for (k, inj) in g.positions.iter().zip(g.injection()) {
                rows[*k] += &inj;
            }
        }
        if let Some(b) = topo.parent[j] {
            let bv = &branches[b];
            let recv = &bv.s_phase - &bv.l_phase.mul_left(&topo.branches[b].z);
            let to_pos = topo.branches[b].phases.positions_in(topo.bus_phases[j]).expect("checked phases");
            for (k, e) in to_pos.iter().zip(recv.diag()) {
                rows[*k] += &e;
            }
        }
        for &c in &topo.children[j] {
            let bv = &branches[c];
            for (k, e) in bv.from_positions.iter().zip(bv.s_phase.diag()) {
                rows[*k] += &-&e;
            }
        }
        let shunt = &model.buses[j].shunt;
        if shunt.iter().any(|y| y.norm() > 0.0) {
            let draw = buses[j].v_phase.mul_right(&shunt.adjoint());
            for (k, e) in draw.diag().into_iter().enumerate() {
                rows[k] += &-&e;
            }
        }
        for (k, row) in rows.into_iter().enumerate() {
            let ph = topo.bus_phases[j].iter().nth(k).expect("phase").letter();
            p.add_eq(format!("balance {} {}", topo.bus_ids[j], ph), row);
        }
    }

    // Voltage bounds on squared magnitudes.
    if opts.bounds == BoundMode::Enforce {
        for j in 0..n_bus {
            let bus = &model.buses[j];
            if j == src || opts.exempt.contains(&bus.id) {
                continue;
            }
            for (k, e) in buses[j].v_phase.diag().into_iter().enumerate() {
                let ph = bus.phases.iter().nth(k).expect("phase").letter();
                p.add_range(&format!("vbound {} {}", bus.id, ph), &e, bus.vmin * bus.vmin, bus.vmax * bus.vmax);
            }
        }
    }

    let mut sdp = SdpProblem {
        formulation,
        problem: p,
        topology: topo,
        buses,
        branches,
        generators,
        source_injection,
        loads,
        boundary_buses,
        regularization: LinExpr::zero(),
    };
    build_objective(&mut sdp, model, spec, opts.zero_impedance_weight)?;
    sdp.problem.check_indices()?;
    Ok(sdp)
}

impl SdpProblem {
    /// The rank-one point `v = VV^H`, `S = V I^H`, `ℓ = II^H` of a power-flow
    /// solution, with generator output `dispatch` (real power per phase).
    ///
    /// The problem must have been built with the solution's load power.
    pub fn point_from_power_flow(&self, sol: &PowerFlowSolution, dispatch: &[Vec<f64>]) -> Result<Vec<f64>> {
        let topo = &self.topology;
        if sol.voltages.len() != topo.n_buses() || dispatch.len() != self.generators.len() {
            return Err(Error::Dimension("power-flow solution does not match the problem".into()));
        }
        let a = fortescue_matrix();
        let to_seq = |m: &CMat| a.adjoint() * m * &a;
        let mut x = vec![0.0; self.problem.n_vars];
        let vv: Vec<CMat> = sol.voltages.iter().map(|v| Hermitian::outer(&to_cvec(v)).into_matrix()).collect();
        for (j, bv) in self.buses.iter().enumerate() {
            match bv.frame {
                Frame::Phase => bv.v.write(&vv[j], &mut x),
                Frame::Sequence => bv.v.write(&to_seq(&vv[j]), &mut x),
            }
            if let Some(aux) = bv.aux {
                aux.write(&vv[j], &mut x);
            }
        }
        for (b, bv) in self.branches.iter().enumerate() {
            let br = &topo.branches[b];
            let vi = to_cvec(&bv.from_positions.iter().map(|&k| sol.voltages[br.from][k]).collect::<Vec<_>>());
            let i = to_cvec(&sol.branch_currents[b]);
            let s = &vi * i.adjoint();
            let l = &i * i.adjoint();
            match bv.frame {
                Frame::Phase => {
                    bv.s.write(&s, &mut x);
                    bv.l.write(&l, &mut x);
                }
                Frame::Sequence => {
                    bv.s.write(&to_seq(&s), &mut x);
                    bv.l.write(&to_seq(&l), &mut x);
                }
            }
        }
        for (g, gv) in self.generators.iter().enumerate() {
            for (h, &pk) in gv.p.iter().zip(&dispatch[g]) {
                x[h.offset] = pk;
            }
        }
        // Source injection closes the source balance.
        let src = topo.source;
        let n = topo.bus_phases[src].len();
        // Every other term of the source row is already determined by x.
        let s0: Vec<Complex64> = self.source_balance_without_injection(&x).iter().map(|r| -r).collect();
        self.source_injection.write(&CMat::from_column_slice(n, 1, &s0), &mut x);
        Ok(x)
    }

    fn source_balance_without_injection(&self, x: &[f64]) -> Vec<Complex64> {
        let src = self.topology.source;
        let ph = &self.topology.bus_phases[src];
        ph.iter()
            .map(|p| {
                let label = format!("balance {} {}", self.topology.bus_ids[src], p.letter());
                let row = self.problem.eq_complex.iter().find(|r| r.label == label).expect("source row");
                let mut e = row.expr.clone();
                let s0 = self.source_injection.expr();
                let k = ph.position(p).expect("phase");
                e = &e - s0.get(k, 0);
                e.eval(x)
            })
            .collect()
    }

    /// Number of auxiliary phase-frame blocks at backbone/lateral boundaries.
    pub fn n_auxiliary(&self) -> usize {
        self.boundary_buses.len()
    }

    /// Branches assembled in the sequence frame.
    pub fn n_sequence_branches(&self) -> usize {
        self.branches.iter().filter(|b| b.frame == Frame::Sequence).count()
    }

    /// Objective value without the zero-impedance regularization.
    pub fn physical_objective(&self, x: &[f64]) -> f64 {
        self.problem.objective_value(x) - self.regularization.eval(x).re
    }
}
