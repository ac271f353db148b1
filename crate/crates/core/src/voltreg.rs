//! Voltage regulation with distributed generation and storage.
//!
//! Bus voltage bounds are replaced by a first-order model of how each unit's
//! output moves the squared magnitudes around the current operating point.
//! Each pass runs the exact power flow at the current dispatch, solves the
//! sequence-frame relaxation for a dispatch change subject to the linearized
//! bounds, and applies the change. The loss term is dropped from the
//! sensitivity, so the power flow is what certifies the final profile.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::extract_solution;
use crate::conic::{solve_problem, SolveStatus, SolverSettings, StatusTag};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, ZERO};
use crate::network::{radial_order, FeederModel, Phase, PhaseSet, TopologyOrder};
use crate::pf::{injections_from_dispatch, solve_with_topology, Dispatch, PowerFlowOptions, PowerFlowSolution};
use crate::sdp::{build_sdp, BoundMode, BuildOptions, Formulation, ObjectiveSpec, SdpProblem};
use crate::symcomp::rotor as alpha;

/// `Γ^{rows × cols}`: entry `(p, q)` is `a^{(q − p) mod 3}`, the ratio of
/// balanced phase voltages `V_p / V_q`.
fn gamma(rows: PhaseSet, cols: PhaseSet) -> CMat {
    let a = alpha();
    let pow = |k: usize| [c(1.0, 0.0), a, a * a][k % 3];
    let r: Vec<Phase> = rows.iter().collect();
    let q: Vec<Phase> = cols.iter().collect();
    CMat::from_fn(r.len(), q.len(), |i, j| pow(3 + q[j].index() - r[i].index()))
}

/// Power-flow matrix `S_g = Γ^{Φ_g} diag(Λ_g)` of a unit injecting `Λ_g`,
/// assuming balanced voltages at its bus.
pub fn dg_outer_product_approx(lambda: &[Complex64], phases: PhaseSet) -> Result<CMat> {
    if lambda.len() != phases.len() {
        return Err(Error::Dimension(format!("{} outputs for phases {phases}", lambda.len())));
    }
    let mut s = gamma(phases, phases);
    for (j, l) in lambda.iter().enumerate() {
        for i in 0..phases.len() {
            s[(i, j)] *= l;
        }
    }
    Ok(s)
}

/// First-order map from unit outputs to squared voltage magnitudes.
///
/// Column `k` is one phase of one unit, `columns[k] = (generator, phase
/// position within the unit)`. For monitored bus `m` and bus phase `p`,
/// `Δ|V|² = Σ_k dp[m][p][k]·ΔP_k + dq[m][p][k]·ΔQ_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoltageSensitivity {
    pub bus_ids: Vec<String>,
    #[serde(skip)]
    pub buses: Vec<usize>,
    pub columns: Vec<(usize, usize)>,
    pub dp: Vec<Vec<Vec<f64>>>,
    pub dq: Vec<Vec<Vec<f64>>>,
}

impl VoltageSensitivity {
    /// Predicted change of `|V|²` at every monitored bus phase.
    pub fn predict(&self, delta: &[Vec<Complex64>]) -> Result<Vec<Vec<f64>>> {
        let flat = self
            .columns
            .iter()
            .map(|&(g, k)| {
                delta
                    .get(g)
                    .and_then(|d| d.get(k))
                    .copied()
                    .ok_or_else(|| Error::Dimension(format!("no output change for generator {g} phase {k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .dp
            .iter()
            .zip(&self.dq)
            .map(|(bp, bq)| {
                bp.iter()
                    .zip(bq)
                    .map(|(rp, rq)| {
                        rp.iter().zip(rq).zip(&flat).map(|((a, b), d)| a * d.re + b * d.im).sum()
                    })
                    .collect()
            })
            .collect())
    }

    /// Sensitivity of monitored bus `m` phase position `p` to real power in
    /// column `k`, reactive power following at ratio `q_ratio`.
    pub fn real_power_coef(&self, m: usize, p: usize, k: usize, q_ratio: f64) -> f64 {
        self.dp[m][p][k] + q_ratio * self.dq[m][p][k]
    }
}

/// Diagonal of `ΔS z^H + z ΔS^H`.
fn drop_diag(ds: &CMat, z: &CMat) -> Vec<f64> {
    let d = ds * z.adjoint() + z * ds.adjoint();
    (0..d.nrows()).map(|i| d[(i, i)].re).collect()
}

/// Sweeps one unit-output column down the tree and returns `Δ|V|²` per bus.
fn propagate(topo: &TopologyOrder, gen_bus: usize, gen_phases: PhaseSet, lambda: &[Complex64]) -> Vec<Vec<f64>> {
    let mut on_path = vec![false; topo.branches.len()];
    for b in topo.path(gen_bus) {
        on_path[b] = true;
    }
    let mut dv: Vec<Vec<f64>> = topo.bus_phases.iter().map(|p| vec![0.0; p.len()]).collect();
    for &bus in &topo.order {
        let Some(b) = topo.parent[bus] else { continue };
        let br = &topo.branches[b];
        let from_phases = topo.bus_phases[br.from];
        let mut next: Vec<f64> = br
            .phases
            .iter()
            .map(|ph| from_phases.position(ph).map_or(0.0, |k| dv[br.from][k]))
            .collect();
        if on_path[b] {
            // The unit's current flows through this branch, opposite to the
            // load direction.
            let g = gamma(br.phases, gen_phases);
            let cols = gen_phases.positions_in(br.phases).unwrap_or_default();
            let mut ds = CMat::zeros(br.phases.len(), br.phases.len());
            for (j, &col) in cols.iter().enumerate() {
                for i in 0..br.phases.len() {
                    ds[(i, col)] = -g[(i, j)] * lambda[j];
                }
            }
            for (x, d) in next.iter_mut().zip(drop_diag(&ds, &br.z)) {
                *x -= d;
            }
        }
        if let Some(r) = &br.ratio {
            for (x, r) in next.iter_mut().zip(r) {
                *x *= r * r;
            }
        }
        dv[bus] = next;
    }
    dv
}

/// Linear sensitivity of `|V|²` at `monitored` buses to every unit output.
pub fn voltage_sensitivity(model: &FeederModel, topo: &TopologyOrder, monitored: &[String]) -> Result<VoltageSensitivity> {
    let mut buses = Vec::with_capacity(monitored.len());
    for id in monitored {
        let b = topo.bus(id).ok_or_else(|| Error::UnknownId { kind: "bus", id: id.clone() })?;
        if b != topo.source && topo.parent[b].is_none() {
            return Err(Error::Disconnected(id.clone()));
        }
        buses.push(b);
    }
    let mut columns = Vec::new();
    let mut sweeps_p = Vec::new();
    let mut sweeps_q = Vec::new();
    for (g, gen) in model.generators.iter().enumerate() {
        let gb = topo.bus(&gen.bus).ok_or_else(|| Error::UnknownId { kind: "bus", id: gen.bus.clone() })?;
        for k in 0..gen.phases.len() {
            let unit = |v: Complex64| (0..gen.phases.len()).map(|j| if j == k { v } else { ZERO }).collect::<Vec<_>>();
            columns.push((g, k));
            sweeps_p.push(propagate(topo, gb, gen.phases, &unit(c(1.0, 0.0))));
            sweeps_q.push(propagate(topo, gb, gen.phases, &unit(c(0.0, 1.0))));
        }
    }
    let gather = |sweeps: &[Vec<Vec<f64>>]| -> Vec<Vec<Vec<f64>>> {
        buses
            .iter()
            .map(|&b| (0..topo.bus_phases[b].len()).map(|p| sweeps.iter().map(|s| s[b][p]).collect()).collect())
            .collect()
    };
    Ok(VoltageSensitivity {
        bus_ids: monitored.to_vec(),
        dp: gather(&sweeps_p),
        dq: gather(&sweeps_q),
        buses,
        columns,
    })
}

/// The relaxation whose voltage bounds act through the sensitivity model.
#[derive(Debug, Clone)]
pub struct VoltRegProblem {
    pub sdp: SdpProblem,
    /// Real power per unit phase the linearization is centered on (p.u.).
    pub reference: Vec<Vec<f64>>,
}

/// Sequence-frame relaxation with `vmin² ≤ diag(v0) + Δv(ΔΛ) ≤ vmax²` at
/// every monitored bus in place of the ordinary voltage bounds.
///
/// `v0` is `|V|²` per bus (model order) at the dispatch `reference`; `loads`
/// are the bus load powers at that point.
pub fn build_voltreg_problem(
    model: &FeederModel,
    v0: &[Vec<f64>],
    reference: &[Vec<f64>],
    sens: &VoltageSensitivity,
    spec: &ObjectiveSpec,
    loads: &[Vec<Complex64>],
) -> Result<VoltRegProblem> {
    let opts = BuildOptions { bounds: BoundMode::Relax, loads: Some(loads.to_vec()), ..BuildOptions::default() };
    let mut sdp = build_sdp(model, Formulation::Symmetrical, spec, &opts)?;
    let topo = sdp.topology.clone();
    if v0.len() != topo.n_buses() {
        return Err(Error::Dimension("baseline voltages must cover every bus".into()));
    }
    if reference.len() != model.generators.len() {
        return Err(Error::Dimension("reference dispatch must cover every generator".into()));
    }
    let q_ratio: Vec<f64> = model.generators.iter().map(|g| g.q_ratio()).collect();
    for (m, &bus) in sens.buses.iter().enumerate() {
        let b = &model.buses[bus];
        for (p, ph) in topo.bus_phases[bus].iter().enumerate() {
            let mut expr = crate::sdp::LinExpr::zero();
            let mut shift = 0.0;
            let mut any = false;
            for (k, &(g, j)) in sens.columns.iter().enumerate() {
                let coef = sens.real_power_coef(m, p, k, q_ratio[g]);
                if coef.abs() < 1e-14 {
                    continue;
                }
                any = true;
                expr += &sdp.generators[g].p[j].scalar().scaled_real(coef);
                shift += coef * reference[g][j];
            }
            if !any {
                // No unit can move this phase; the power flow reports it.
                continue;
            }
            let base = v0[bus][p] - shift;
            let label = format!("vreg {} {}", b.id, ph.letter());
            sdp.problem.add_range(&label, &expr, b.vmin * b.vmin - base, b.vmax * b.vmax - base);
        }
    }
    Ok(VoltRegProblem { sdp, reference: reference.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoltRegOptions {
    /// Max per-phase real-power change at convergence (kW).
    pub tol: f64,
    /// Tolerated bound violation in the power flow (p.u.).
    pub v_slack: f64,
    pub max_iter: usize,
}

impl Default for VoltRegOptions {
    fn default() -> Self {
        VoltRegOptions { tol: 0.1, v_slack: 1e-3, max_iter: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoltRegStep {
    pub iteration: usize,
    /// Applied real-power change per unit phase (p.u.).
    pub delta: Vec<Vec<f64>>,
    pub max_delta_kw: f64,
    /// Worst bound violation of the power flow after the step (p.u.).
    pub violation: f64,
    pub objective: f64,
    pub status: StatusTag,
    pub halved: bool,
}

#[derive(Debug, Clone)]
pub struct VoltRegSolution {
    /// Output per unit phase (p.u.).
    pub dispatch: Dispatch,
    pub steps: Vec<VoltRegStep>,
    /// Power flow at `dispatch`.
    pub oracle: PowerFlowSolution,
    pub violation: f64,
    pub converged: bool,
    /// Status of a failed relaxation solve that stopped the loop.
    pub failure: Option<SolveStatus>,
}

impl VoltRegSolution {
    pub fn real_dispatch(&self) -> Vec<Vec<f64>> {
        self.dispatch.iter().map(|d| d.iter().map(|x| x.re).collect()).collect()
    }
}

/// Buses whose bounds are checked: all but the source and `exempt`.
pub fn monitored_buses(model: &FeederModel, exempt: &[String]) -> Vec<String> {
    model
        .buses
        .iter()
        .filter(|b| b.id != model.source.bus && !exempt.contains(&b.id))
        .map(|b| b.id.clone())
        .collect()
}

/// Worst violation of `[vmin, vmax]` over the monitored buses (p.u., 0 when
/// feasible).
pub fn bound_violation(model: &FeederModel, sol: &PowerFlowSolution, monitored: &[usize]) -> f64 {
    monitored
        .iter()
        .flat_map(|&i| {
            let b = &model.buses[i];
            sol.voltages[i].iter().map(move |v| (b.vmin - v.norm()).max(v.norm() - b.vmax).max(0.0))
        })
        .fold(0.0, f64::max)
}

fn complex_dispatch(model: &FeederModel, p: &[Vec<f64>]) -> Dispatch {
    model
        .generators
        .iter()
        .zip(p)
        .map(|(g, p)| p.iter().map(|&x| c(x, x * g.q_ratio())).collect())
        .collect()
}

/// Runs the regulation loop from the idle dispatch (zero, clipped to each
/// unit's limits).
pub fn run_voltage_regulation(
    model: &FeederModel,
    exempt: &[String],
    spec: &ObjectiveSpec,
    settings: &SolverSettings,
    opts: &VoltRegOptions,
) -> Result<VoltRegSolution> {
    if opts.max_iter == 0 {
        return Err(Error::Config("voltreg.max_iter must be at least 1".into()));
    }
    if model.generators.is_empty() {
        return Err(Error::InvalidModel("voltage regulation needs at least one generator".into()));
    }
    let topo = radial_order(model)?;
    let monitored = monitored_buses(model, exempt);
    let mon_idx: Vec<usize> = monitored.iter().filter_map(|id| topo.bus(id)).collect();
    let sens = voltage_sensitivity(model, &topo, &monitored)?;
    let pf_opts = PowerFlowOptions::default();
    let oracle_at = |p: &[Vec<f64>]| -> Result<PowerFlowSolution> {
        let inj = injections_from_dispatch(model, &complex_dispatch(model, p))?;
        solve_with_topology(model, &topo, &inj, &pf_opts)
    };
    let tol = opts.tol / model.phase_base_kva();

    let mut p: Vec<Vec<f64>> = model
        .generators
        .iter()
        .map(|g| g.p_min.iter().zip(&g.p_max).map(|(lo, hi)| 0.0_f64.clamp(*lo, *hi)).collect())
        .collect();
    let mut oracle = oracle_at(&p)?;
    let mut violation = bound_violation(model, &oracle, &mon_idx);
    let mut steps = Vec::new();
    let mut converged = false;
    let mut failure = None;

    for k in 1..=opts.max_iter {
        let v0: Vec<Vec<f64>> = oracle.voltages.iter().map(|v| v.iter().map(|x| x.norm_sqr()).collect()).collect();
        let prob = build_voltreg_problem(model, &v0, &p, &sens, spec, &oracle.load_power)?;
        let (raw, status) = solve_problem(&prob.sdp.problem, settings)?;
        if !status.tag.has_solution() {
            failure = Some(status);
            break;
        }
        let sol = extract_solution(&raw, status, &prob.sdp, model)?;
        let target = sol.real_dispatch();
        let delta: Vec<Vec<f64>> = target.iter().zip(&p).map(|(t, p)| t.iter().zip(p).map(|(t, p)| t - p).collect()).collect();
        let step_to = |frac: f64| -> Vec<Vec<f64>> {
            p.iter().zip(&delta).map(|(p, d)| p.iter().zip(d).map(|(p, d)| p + frac * d).collect()).collect()
        };
        let mut next = step_to(1.0);
        let mut next_oracle = oracle_at(&next)?;
        let mut next_violation = bound_violation(model, &next_oracle, &mon_idx);
        let mut frac = 1.0;
        if next_violation > violation && next_violation > opts.v_slack {
            frac = 0.5;
            next = step_to(frac);
            next_oracle = oracle_at(&next)?;
            next_violation = bound_violation(model, &next_oracle, &mon_idx);
        }
        let applied: Vec<Vec<f64>> = delta.iter().map(|d| d.iter().map(|x| x * frac).collect()).collect();
        let max_delta = applied.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
        steps.push(VoltRegStep {
            iteration: k,
            delta: applied,
            max_delta_kw: max_delta * model.phase_base_kva(),
            violation: next_violation,
            objective: sol.objective,
            status: sol.status.tag,
            halved: frac < 1.0,
        });
        p = next;
        oracle = next_oracle;
        violation = next_violation;
        if max_delta <= tol && violation <= opts.v_slack {
            converged = true;
            break;
        }
    }
    Ok(VoltRegSolution {
        dispatch: complex_dispatch(model, &p),
        steps,
        oracle,
        violation,
        converged,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_product_of_ones_is_gamma() {
        let s = dg_outer_product_approx(&[c(1.0, 0.0); 3], PhaseSet::ABC).unwrap();
        let a = alpha();
        let want = [[c(1.0, 0.0), a, a * a], [a * a, c(1.0, 0.0), a], [a, a * a, c(1.0, 0.0)]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((s[(i, j)] - want[i][j]).norm() < 1e-15);
            }
        }
        let zero = dg_outer_product_approx(&[ZERO; 3], PhaseSet::ABC).unwrap();
        assert!(zero.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn single_phase_unit_is_its_output() {
        let s = dg_outer_product_approx(&[c(0.1, 0.0)], PhaseSet::single(Phase::A)).unwrap();
        assert_eq!(s.shape(), (1, 1));
        assert!((s[(0, 0)] - c(0.1, 0.0)).norm() < 1e-15);
        assert!(dg_outer_product_approx(&[ZERO; 2], PhaseSet::ABC).is_err());
    }

    #[test]
    fn gamma_matches_balanced_voltage_ratios() {
        let v = [c(1.0, 0.0), alpha() * alpha(), alpha()];
        let g = gamma(PhaseSet::ABC, PhaseSet::ABC);
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[(i, j)] - v[i] / v[j]).norm() < 1e-15);
            }
        }
    }
}
