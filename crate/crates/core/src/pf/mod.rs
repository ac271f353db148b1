//! Exact unbalanced power flow by backward/forward sweep.
//!
//! This is the reference solution the relaxations are judged against, and
//! the voltage source for the load update and voltage regulation loops.

mod zip;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, CVec, ZERO};
use crate::network::{radial_order, FeederModel, TopologyOrder};

pub use zip::{evaluate_zip_load, evaluate_zip_remainder, impedance_admittance, LoadDraw};

/// Per-bus complex power injection, one entry per bus phase.
pub type Injections = Vec<Vec<Complex64>>;

/// Per-generator complex output, one entry per generator phase.
pub type Dispatch = Vec<Vec<Complex64>>;

#[derive(Debug, Clone)]
pub struct PowerFlowOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Any |V| below this aborts the sweep as a collapse.
    pub collapse_pu: f64,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions { tol: 1e-8, max_iter: 100, collapse_pu: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub bus_ids: Vec<String>,
    pub branch_ids: Vec<String>,
    /// Per-bus phasors, ordered like the bus phase set.
    pub voltages: Vec<Vec<Complex64>>,
    /// Sending-end (primary side for regulators) current per branch.
    pub branch_currents: Vec<Vec<Complex64>>,
    /// Sending-end complex power per branch phase.
    pub flows: Vec<Vec<Complex64>>,
    /// Power drawn by loads at each bus, at the final voltages.
    pub load_power: Vec<Vec<Complex64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest voltage change in the last sweep.
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    pub fn voltage(&self, bus: &str) -> Option<&[Complex64]> {
        let i = self.bus_ids.iter().position(|b| b == bus)?;
        Some(&self.voltages[i])
    }

    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.voltages.iter().map(|v| v.iter().map(|x| x.norm()).collect()).collect()
    }
}

/// Zero injections shaped like the model's buses.
pub fn zero_injections(model: &FeederModel) -> Injections {
    model.buses.iter().map(|b| vec![ZERO; b.phases.len()]).collect()
}

/// Bus injections produced by a generator dispatch.
pub fn injections_from_dispatch(model: &FeederModel, dispatch: &Dispatch) -> Result<Injections> {
    let index = model.bus_index();
    let mut inj = zero_injections(model);
    for (g, gen) in model.generators.iter().enumerate() {
        let bi = *index
            .get(gen.bus.as_str())
            .ok_or_else(|| Error::UnknownId { kind: "bus", id: gen.bus.clone() })?;
        let pos = gen
            .phases
            .positions_in(model.buses[bi].phases)
            .ok_or_else(|| Error::InvalidModel(format!("generator `{}` phases", gen.id)))?;
        let out = dispatch.get(g).ok_or_else(|| {
            Error::Dimension(format!("dispatch missing for generator `{}`", gen.id))
        })?;
        for (k, &p) in pos.iter().enumerate() {
            inj[bi][p] += out[k];
        }
    }
    Ok(inj)
}

/// Load draws (power, current) summed per bus at the given voltages.
pub fn bus_load_draw(
    model: &FeederModel,
    voltages: &[Vec<Complex64>],
) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    let index = model.bus_index();
    let mut power = zero_injections(model);
    let mut current = zero_injections(model);
    for load in &model.loads {
        let bi = *index
            .get(load.bus.as_str())
            .ok_or_else(|| Error::UnknownId { kind: "bus", id: load.bus.clone() })?;
        let pos = load
            .phases
            .positions_in(model.buses[bi].phases)
            .ok_or_else(|| Error::InvalidModel(format!("load `{}` phases", load.id)))?;
        let v: Vec<Complex64> = pos.iter().map(|&p| voltages[bi][p]).collect();
        let draw = evaluate_zip_load(load, &v)?;
        for (k, &p) in pos.iter().enumerate() {
            power[bi][p] += draw.power[k];
            current[bi][p] += draw.current[k];
        }
    }
    Ok((power, current))
}

/// Source phasors projected onto every bus's phases.
pub fn flat_start(model: &FeederModel, topo: &TopologyOrder) -> Vec<Vec<Complex64>> {
    let src_phases = topo.bus_phases[topo.source];
    let nominal = [c(1.0, 0.0), Complex64::from_polar(1.0, -2.0943951023931957), Complex64::from_polar(1.0, 2.0943951023931957)];
    model
        .buses
        .iter()
        .map(|b| {
            b.phases
                .iter()
                .map(|p| match src_phases.position(p) {
                    Some(k) => model.source.v_ref[k],
                    None => nominal[p.index()],
                })
                .collect()
        })
        .collect()
}

/// Backward/forward sweep from a flat start.
///
/// Regulator secondaries follow `V_sec = ratio ⊙ (V_pri − z·I_pri)` with
/// `I_pri = ratio ⊙ I_sec`; ZIP loads are re-evaluated every sweep.
pub fn solve_power_flow(
    model: &FeederModel,
    injections: &Injections,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution> {
    let topo = radial_order(model)?;
    solve_with_topology(model, &topo, injections, opts)
}

pub fn solve_with_topology(
    model: &FeederModel,
    topo: &TopologyOrder,
    injections: &Injections,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution> {
    let n = topo.n_buses();
    if injections.len() != n {
        return Err(Error::Dimension("injections must cover every bus".into()));
    }
    let shunts: Vec<_> = model.buses.iter().map(|b| b.shunt.clone()).collect();
    let mut v = flat_start(model, topo);
    let mut currents: Vec<Vec<Complex64>> =
        topo.branches.iter().map(|b| vec![ZERO; b.phases.len()]).collect();
    let pos_in_from: Vec<Vec<usize>> = topo
        .branches
        .iter()
        .map(|b| b.phases.positions_in(topo.bus_phases[b.from]).expect("validated phases"))
        .collect();
    let pos_in_to: Vec<Vec<usize>> = topo
        .branches
        .iter()
        .map(|b| b.phases.positions_in(topo.bus_phases[b.to]).expect("validated phases"))
        .collect();

    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;

        // Backward: currents drawn at each bus, accumulated toward the source.
        let (_, load_i) = bus_load_draw(model, &v)?;
        let mut bus_i: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let vj = CVec::from_column_slice(&v[j]);
                let shunt_i = &shunts[j] * &vj;
                (0..v[j].len())
                    .map(|k| load_i[j][k] + shunt_i[k] - (injections[j][k] / v[j][k]).conj())
                    .collect()
            })
            .collect();
        for &j in topo.order.iter().rev() {
            let Some(b) = topo.parent[j] else { continue };
            let br = &topo.branches[b];
            let mut ib: Vec<Complex64> = pos_in_to[b].iter().map(|&k| bus_i[j][k]).collect();
            if let Some(r) = &br.ratio {
                for (x, rk) in ib.iter_mut().zip(r) {
                    *x *= *rk;
                }
            }
            for (k, &p) in pos_in_from[b].iter().enumerate() {
                bus_i[br.from][p] += ib[k];
            }
            currents[b] = ib;
        }

        // Forward: voltages from the source down.
        delta = 0.0;
        for &j in &topo.order {
            let Some(b) = topo.parent[j] else { continue };
            let br = &topo.branches[b];
            let vi: Vec<Complex64> = pos_in_from[b].iter().map(|&k| v[br.from][k]).collect();
            let drop = &br.z * CVec::from_column_slice(&currents[b]);
            let mut vj: Vec<Complex64> = vi.iter().zip(drop.iter()).map(|(a, d)| a - d).collect();
            if let Some(r) = &br.ratio {
                for (x, rk) in vj.iter_mut().zip(r) {
                    *x *= *rk;
                }
            }
            for (k, &p) in pos_in_to[b].iter().enumerate() {
                delta = delta.max((vj[k] - v[j][p]).norm());
                v[j][p] = vj[k];
                let mag = vj[k].norm();
                if mag < opts.collapse_pu {
                    return Err(Error::VoltageCollapse { bus: topo.bus_ids[j].clone(), magnitude: mag });
                }
            }
        }
        if delta < opts.tol {
            break;
        }
    }
    let converged = delta < opts.tol;
    if !converged {
        return Err(Error::PowerFlowDiverged { iterations, mismatch: delta });
    }

    let flows = topo
        .branches
        .iter()
        .enumerate()
        .map(|(b, br)| {
            pos_in_from[b]
                .iter()
                .zip(&currents[b])
                .map(|(&k, i)| v[br.from][k] * i.conj())
                .collect()
        })
        .collect();
    let (load_power, _) = bus_load_draw(model, &v)?;
    Ok(PowerFlowSolution {
        bus_ids: topo.bus_ids.clone(),
        branch_ids: topo.branches.iter().map(|b| b.id.clone()).collect(),
        voltages: v,
        branch_currents: currents,
        flows,
        load_power,
        iterations,
        converged,
        max_mismatch: delta,
    })
}

/// Sending-end complex power per phase on a named branch.
pub fn feeder_head_flows(sol: &PowerFlowSolution, segment: &str) -> Result<Vec<Complex64>> {
    let b = sol
        .branch_ids
        .iter()
        .position(|id| id == segment)
        .ok_or_else(|| Error::UnknownId { kind: "segment", id: segment.to_string() })?;
    Ok(sol.flows[b].clone())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::linalg::{polar, CMat};
    use crate::network::{
        Bus, Connection, LineSegment, PhaseSet, RegulatorBank, SourceEquivalent, Units, ZipLoad,
        ZipWeights, DEFAULT_V_FLOOR,
    };

    fn bus(id: &str, phases: PhaseSet) -> Bus {
        let n = phases.len();
        Bus {
            id: id.into(),
            phases,
            region: "main".into(),
            vmin: 0.9,
            vmax: 1.1,
            shunt: CMat::zeros(n, n),
        }
    }

    fn balanced() -> Vec<Complex64> {
        vec![polar(1.0, 0.0), polar(1.0, -120.0), polar(1.0, 120.0)]
    }

    /// Single-phase source, one line, one constant-power load.
    fn two_bus(z: Complex64, s: Complex64) -> FeederModel {
        let a = PhaseSet::single(crate::network::Phase::A);
        FeederModel {
            name: "two-bus".into(),
            units: Units::PerUnit,
            s_base_kva: 3000.0,
            v_base_kv: BTreeMap::from([("main".to_string(), 4.16)]),
            buses: vec![bus("0", a), bus("1", a)],
            lines: vec![LineSegment {
                id: "01".into(),
                from: "0".into(),
                to: "1".into(),
                phases: a,
                z: CMat::from_element(1, 1, z),
            }],
            regulators: vec![],
            loads: vec![ZipLoad {
                id: "L1".into(),
                bus: "1".into(),
                phases: a,
                connection: Connection::Wye,
                s_nominal: vec![s],
                zip: ZipWeights::CONSTANT_POWER,
                v_floor: DEFAULT_V_FLOOR,
            }],
            generators: vec![],
            source: SourceEquivalent { bus: "0".into(), v_ref: vec![c(1.0, 0.0)], grid_price: 0.1 },
        }
    }

    fn three_phase_chain(with_reg: bool) -> FeederModel {
        let abc = PhaseSet::ABC;
        let z = CMat::from_fn(3, 3, |i, j| if i == j { c(0.02, 0.06) } else { c(0.005, 0.02) });
        let mut m = FeederModel {
            name: "chain".into(),
            units: Units::PerUnit,
            s_base_kva: 3000.0,
            v_base_kv: BTreeMap::from([("main".to_string(), 4.16)]),
            buses: vec![bus("s", abc), bus("r", abc), bus("m", abc), bus("e", abc)],
            lines: vec![
                LineSegment { id: "rm".into(), from: "r".into(), to: "m".into(), phases: abc, z: z.clone() },
                LineSegment { id: "me".into(), from: "m".into(), to: "e".into(), phases: abc, z },
            ],
            regulators: vec![],
            loads: vec![ZipLoad {
                id: "Le".into(),
                bus: "e".into(),
                phases: abc,
                connection: Connection::Wye,
                s_nominal: vec![c(0.3, 0.1), c(0.2, 0.05), c(0.4, 0.2)],
                zip: ZipWeights { z: 0.3, i: 0.2, p: 0.5 },
                v_floor: DEFAULT_V_FLOOR,
            }],
            generators: vec![],
            source: SourceEquivalent { bus: "s".into(), v_ref: balanced(), grid_price: 0.1 },
        };
        if with_reg {
            m.regulators.push(RegulatorBank {
                id: "reg".into(),
                from: "s".into(),
                to: "r".into(),
                phases: abc,
                taps: vec![4, -2, 8],
                z: CMat::from_fn(3, 3, |i, j| if i == j { c(0.001, 0.004) } else { ZERO }),
            });
        } else {
            m.lines.push(LineSegment {
                id: "sr".into(),
                from: "s".into(),
                to: "r".into(),
                phases: abc,
                z: CMat::zeros(3, 3),
            });
        }
        m
    }

    #[test]
    fn two_bus_matches_fixed_point_oracle() {
        let (z, s) = (c(0.01, 0.02), c(0.5, 0.2));
        let m = two_bus(z, s);
        let sol = solve_power_flow(&m, &zero_injections(&m), &PowerFlowOptions::default()).unwrap();

        // Independent oracle: V = V0 - z·conj(s/V) iterated to a fixed point.
        let mut v = c(1.0, 0.0);
        for _ in 0..200 {
            v = c(1.0, 0.0) - z * (s / v).conj();
        }
        assert!((sol.voltage("1").unwrap()[0] - v).norm() < 1e-10);

        let head = feeder_head_flows(&sol, "01").unwrap()[0];
        let i = (s / v).conj();
        let expected = s + z * i.norm_sqr();
        assert!((head - expected).norm() < 1e-8);
    }

    #[test]
    fn zero_load_gives_source_voltage() {
        let m = two_bus(c(0.01, 0.02), ZERO);
        let sol = solve_power_flow(&m, &zero_injections(&m), &PowerFlowOptions::default()).unwrap();
        assert!((sol.voltage("1").unwrap()[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(sol.flows[0][0].norm() < 1e-14);
    }

    #[test]
    fn losses_scale_with_square_of_load() {
        let z = c(0.001, 0.002);
        let loss = |s: Complex64| {
            let m = two_bus(z, s);
            let sol =
                solve_power_flow(&m, &zero_injections(&m), &PowerFlowOptions::default()).unwrap();
            (sol.flows[0][0] - sol.load_power[1][0]).re
        };
        let ratio = loss(c(0.2, 0.08)) / loss(c(0.1, 0.04));
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn kvl_and_power_balance_hold_on_chain() {
        for with_reg in [false, true] {
            let m = three_phase_chain(with_reg);
            let topo = radial_order(&m).unwrap();
            let sol = solve_with_topology(&m, &topo, &zero_injections(&m), &PowerFlowOptions::default())
                .unwrap();
            for (b, br) in topo.branches.iter().enumerate() {
                let vi = CVec::from_column_slice(&sol.voltages[br.from]);
                let i = CVec::from_column_slice(&sol.branch_currents[b]);
                let mut vj = vi - &br.z * i;
                if let Some(r) = &br.ratio {
                    for k in 0..3 {
                        vj[k] *= r[k];
                    }
                }
                for k in 0..3 {
                    assert!((vj[k] - sol.voltages[br.to][k]).norm() < 1e-10);
                }
            }
            // Head injection = load + losses; losses are non-negative.
            let head: Complex64 = feeder_head_flows(&sol, if with_reg { "reg" } else { "sr" })
                .unwrap()
                .iter()
                .sum();
            let load: Complex64 = sol.load_power.iter().flatten().sum();
            assert!(head.re >= load.re - 1e-12);
            assert!(head.re - load.re < 0.05);
        }
    }

    #[test]
    fn regulator_boosts_secondary() {
        let m = three_phase_chain(true);
        let sol = solve_power_flow(&m, &zero_injections(&m), &PowerFlowOptions::default()).unwrap();
        let plain = three_phase_chain(false);
        let base = solve_power_flow(&plain, &zero_injections(&plain), &PowerFlowOptions::default())
            .unwrap();
        let r = sol.voltage("r").unwrap();
        assert!(r[2].norm() > 1.04);
        assert!(sol.voltage("e").unwrap()[0].norm() > base.voltage("e").unwrap()[0].norm());
    }

    #[test]
    fn injections_reduce_head_flow() {
        let m = three_phase_chain(false);
        let mut inj = zero_injections(&m);
        inj[2] = vec![c(0.1, 0.0); 3];
        let with = solve_power_flow(&m, &inj, &PowerFlowOptions::default()).unwrap();
        let without = solve_power_flow(&m, &zero_injections(&m), &PowerFlowOptions::default()).unwrap();
        let h1: f64 = feeder_head_flows(&with, "sr").unwrap().iter().map(|s| s.re).sum();
        let h0: f64 = feeder_head_flows(&without, "sr").unwrap().iter().map(|s| s.re).sum();
        assert!(h0 - h1 > 0.29 && h0 - h1 < 0.31);
    }

    #[test]
    fn heavy_load_collapses() {
        let m = two_bus(c(0.1, 0.2), c(5.0, 2.0));
        let err = solve_power_flow(&m, &zero_injections(&m), &PowerFlowOptions::default());
        assert!(matches!(err, Err(Error::VoltageCollapse { .. }) | Err(Error::PowerFlowDiverged { .. })));
    }

    #[test]
    fn unknown_segment_is_reported() {
        let m = two_bus(c(0.01, 0.02), c(0.1, 0.0));
        let sol = solve_power_flow(&m, &zero_injections(&m), &PowerFlowOptions::default()).unwrap();
        assert!(matches!(feeder_head_flows(&sol, "nope"), Err(Error::UnknownId { .. })));
    }
}
