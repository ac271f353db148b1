//! Voltage-dependent load update loop around the relaxation.
//!
//! Each pass solves the SDP with loads frozen at the power they draw at the
//! previous pass's voltages, then re-evaluates them. The loop stops at a
//! fixed point of that map: either the voltage magnitudes stop moving or the
//! re-evaluated loads equal the ones just used.
//!
//! By default the constant-impedance share of every load is not frozen but
//! carried exactly as a bus admittance, since `s = conj(y)|v|²` is linear in
//! the voltage block. Only the current and power shares are iterated.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{extract_solution, OpfSolution};
use crate::conic::{solve_problem, SolveStatus, SolverSettings, StatusTag};
use crate::error::{Error, Result};
use crate::network::{Connection, FeederModel, ZipLoad, ZipWeights};
use crate::pf::{evaluate_zip_load, evaluate_zip_remainder, impedance_admittance};
use crate::sdp::{build_sdp, BuildOptions, Formulation, LoadProfile, ObjectiveSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopOptions {
    /// Max per-phase change of |V| between passes (p.u.).
    pub tol: f64,
    pub max_iter: usize,
    /// Carry constant-impedance shares as bus admittances.
    pub exact_impedance: bool,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions { tol: 1e-4, max_iter: 10, exact_impedance: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStep {
    pub iteration: usize,
    /// Max per-phase |Δ|V|| against the voltages the loads were evaluated
    /// at (flat start for the first pass).
    pub max_change: f64,
    /// Max change of any bus load power after re-evaluation (p.u.).
    pub load_change: f64,
    pub objective: f64,
    pub status: StatusTag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub steps: Vec<IterationStep>,
    pub converged: bool,
    pub cap: usize,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn last_change(&self) -> Option<f64> {
        self.steps.last().map(|s| s.max_change)
    }
}

/// Outcome of the loop. `result` is the accepted iterate, or the status of
/// the solve that stopped the loop early; the trace is kept either way.
#[derive(Debug, Clone)]
pub struct LoadUpdateOutcome {
    pub result: std::result::Result<OpfSolution, SolveStatus>,
    pub trace: IterationTrace,
}

/// A copy of `model` whose loads are the constant (wye, per-terminal)
/// powers each load draws at `voltages`. Delta loads become their terminal
/// equivalents.
pub fn update_loads(model: &FeederModel, voltages: &[Vec<Complex64>]) -> Result<FeederModel> {
    let index = model.bus_index();
    let mut out = model.clone();
    for (slot, load) in out.loads.iter_mut().zip(&model.loads) {
        let bi = *index
            .get(load.bus.as_str())
            .ok_or_else(|| Error::UnknownId { kind: "bus", id: load.bus.clone() })?;
        let bus_v = voltages
            .get(bi)
            .filter(|v| v.len() == model.buses[bi].phases.len())
            .ok_or_else(|| Error::Dimension(format!("no voltage for loaded bus `{}`", load.bus)))?;
        let pos = load
            .phases
            .positions_in(model.buses[bi].phases)
            .ok_or_else(|| Error::InvalidModel(format!("load `{}` phases", load.id)))?;
        let v: Vec<Complex64> = pos.iter().map(|&p| bus_v[p]).collect();
        let draw = evaluate_zip_load(load, &v)?;
        *slot = ZipLoad {
            connection: Connection::Wye,
            s_nominal: draw.power,
            zip: ZipWeights::CONSTANT_POWER,
            ..load.clone()
        };
    }
    Ok(out)
}

/// A copy of `model` with every load's constant-impedance share added to
/// its bus admittance. Loads themselves are unchanged, so only pair this
/// with [`load_profile`] excluding impedance shares.
pub fn fold_impedance_loads(model: &FeederModel) -> Result<FeederModel> {
    let index = model.bus_index();
    let mut out = model.clone();
    for load in &model.loads {
        let bi = *index
            .get(load.bus.as_str())
            .ok_or_else(|| Error::UnknownId { kind: "bus", id: load.bus.clone() })?;
        let pos = load
            .phases
            .positions_in(model.buses[bi].phases)
            .ok_or_else(|| Error::InvalidModel(format!("load `{}` phases", load.id)))?;
        let y = impedance_admittance(load);
        for (i, &pi) in pos.iter().enumerate() {
            for (j, &pj) in pos.iter().enumerate() {
                out.buses[bi].shunt[(pi, pj)] += y[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Per-bus load power at `voltages`, without the constant-impedance shares
/// when `exclude_impedance` is set.
pub fn load_profile(model: &FeederModel, voltages: &[Vec<Complex64>], exclude_impedance: bool) -> Result<LoadProfile> {
    let index = model.bus_index();
    let mut out: LoadProfile = model.buses.iter().map(|b| vec![Complex64::new(0.0, 0.0); b.phases.len()]).collect();
    for load in &model.loads {
        let bi = *index
            .get(load.bus.as_str())
            .ok_or_else(|| Error::UnknownId { kind: "bus", id: load.bus.clone() })?;
        let pos = load
            .phases
            .positions_in(model.buses[bi].phases)
            .ok_or_else(|| Error::InvalidModel(format!("load `{}` phases", load.id)))?;
        let bus_v = voltages
            .get(bi)
            .filter(|v| v.len() == model.buses[bi].phases.len())
            .ok_or_else(|| Error::Dimension(format!("no voltage for loaded bus `{}`", load.bus)))?;
        let v: Vec<Complex64> = pos.iter().map(|&p| bus_v[p]).collect();
        let draw = if exclude_impedance { evaluate_zip_remainder(load, &v)? } else { evaluate_zip_load(load, &v)? };
        for (k, &p) in pos.iter().enumerate() {
            out[bi][p] += draw.power[k];
        }
    }
    Ok(out)
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn max_load_diff(a: &LoadProfile, b: &LoadProfile) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

/// Runs the relaxation with load re-evaluation until a fixed point.
/// Non-convergence returns the iterate with the smallest voltage change.
pub fn run_opf_with_load_update(
    model: &FeederModel,
    formulation: Formulation,
    spec: &ObjectiveSpec,
    build: &BuildOptions,
    settings: &SolverSettings,
    opts: &LoopOptions,
) -> Result<LoadUpdateOutcome> {
    if opts.max_iter == 0 {
        return Err(Error::Config("loop.max_iter must be at least 1".into()));
    }
    let topo = crate::network::radial_order(model)?;
    let flat = crate::pf::flat_start(model, &topo);
    let exact = opts.exact_impedance;
    let work = if exact { fold_impedance_loads(model)? } else { model.clone() };
    let mut loads = load_profile(model, &flat, exact)?;
    let mut prev_mag: Vec<Vec<f64>> = flat.iter().map(|v| v.iter().map(|x| x.norm()).collect()).collect();
    let mut trace = IterationTrace { steps: Vec::new(), converged: false, cap: opts.max_iter };
    let mut best: Option<(f64, OpfSolution)> = None;

    for k in 1..=opts.max_iter {
        let bo = BuildOptions { loads: Some(loads.clone()), ..build.clone() };
        let sdp = build_sdp(&work, formulation, spec, &bo)?;
        let (raw, status) = solve_problem(&sdp.problem, settings)?;
        if !status.tag.has_solution() {
            trace.steps.push(IterationStep {
                iteration: k,
                max_change: f64::NAN,
                load_change: f64::NAN,
                objective: f64::NAN,
                status: status.tag,
            });
            return Ok(LoadUpdateOutcome { result: Err(status), trace });
        }
        let sol = extract_solution(&raw, status, &sdp, &work)?;
        let mags = sol.magnitudes();
        let change = max_abs_diff(&mags, &prev_mag);
        let next = load_profile(model, &sol.voltages, exact)?;
        let load_change = max_load_diff(&next, &loads);
        trace.steps.push(IterationStep {
            iteration: k,
            max_change: change,
            load_change,
            objective: sol.objective,
            status: sol.status.tag,
        });
        // Loads that do not move reproduce this very solve: a fixed point.
        let done = change <= opts.tol || load_change <= 1e-12;
        if done {
            trace.converged = true;
            return Ok(LoadUpdateOutcome { result: Ok(sol), trace });
        }
        if best.as_ref().is_none_or(|(c, _)| change < *c) {
            best = Some((change, sol));
        }
        prev_mag = mags;
        loads = next;
    }
    let (_, sol) = best.expect("at least one pass ran");
    Ok(LoadUpdateOutcome { result: Ok(sol), trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, polar, CMat};
    use crate::network::*;
    use std::collections::BTreeMap;

    fn feeder(zip: ZipWeights, connection: Connection) -> FeederModel {
        let bus = |id: &str| Bus {
            id: id.into(),
            phases: PhaseSet::ABC,
            region: "main".into(),
            vmin: 0.8,
            vmax: 1.2,
            shunt: CMat::zeros(3, 3),
        };
        FeederModel {
            name: "t".into(),
            units: Units::PerUnit,
            s_base_kva: 1000.0,
            v_base_kv: BTreeMap::from([("main".to_string(), 4.16)]),
            buses: vec![bus("s"), bus("1")],
            lines: vec![LineSegment {
                id: "l".into(),
                from: "s".into(),
                to: "1".into(),
                phases: PhaseSet::ABC,
                z: CMat::from_fn(3, 3, |i, j| if i == j { c(0.02, 0.04) } else { c(0.005, 0.01) }),
            }],
            regulators: vec![],
            loads: vec![ZipLoad {
                id: "ld".into(),
                bus: "1".into(),
                phases: PhaseSet::ABC,
                connection,
                s_nominal: vec![c(0.9, 0.4), c(0.6, 0.3), c(0.75, 0.2)],
                zip,
                v_floor: DEFAULT_V_FLOOR,
            }],
            generators: vec![],
            source: SourceEquivalent {
                bus: "s".into(),
                v_ref: vec![polar(1.0, 0.0), polar(1.0, -120.0), polar(1.0, 120.0)],
                grid_price: 0.1,
            },
        }
    }

    fn at(mag: f64) -> Vec<Vec<Complex64>> {
        let v = vec![polar(mag, 0.0), polar(mag, -120.0), polar(mag, 120.0)];
        vec![v.clone(), v]
    }

    #[test]
    fn constant_power_loads_are_unchanged() {
        let m = feeder(ZipWeights::CONSTANT_POWER, Connection::Wye);
        let u = update_loads(&m, &at(0.93)).unwrap();
        for (a, b) in u.loads[0].s_nominal.iter().zip(&m.loads[0].s_nominal) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_impedance_scales_with_square() {
        let m = feeder(ZipWeights::CONSTANT_IMPEDANCE, Connection::Wye);
        let u = update_loads(&m, &at(0.95)).unwrap();
        for (a, b) in u.loads[0].s_nominal.iter().zip(&m.loads[0].s_nominal) {
            assert!((a - b * 0.9025).norm() < 1e-14);
        }
        assert_eq!(u.loads[0].zip, ZipWeights::CONSTANT_POWER);
        // The input model is untouched.
        assert_eq!(m.loads[0].zip, ZipWeights::CONSTANT_IMPEDANCE);
    }

    #[test]
    fn mixed_zip_matches_pointwise_evaluation() {
        let m = feeder(ZipWeights { z: 0.2, i: 0.3, p: 0.5 }, Connection::Delta);
        let v = vec![polar(0.97, -0.8), polar(0.95, -121.0), polar(0.96, 119.2)];
        let volts = vec![v.clone(), v.clone()];
        let u = update_loads(&m, &volts).unwrap();
        let draw = evaluate_zip_load(&m.loads[0], &v).unwrap();
        assert_eq!(u.loads[0].connection, Connection::Wye);
        for (a, b) in u.loads[0].s_nominal.iter().zip(&draw.power) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn missing_voltage_is_an_error() {
        let m = feeder(ZipWeights::CONSTANT_POWER, Connection::Wye);
        assert!(update_loads(&m, &at(1.0)[..1]).is_err());
    }
}
