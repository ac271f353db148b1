//! Per-unit multiphase radial feeder model and its topology services.
//!
//! Missing phases are represented by reduced-dimension matrices: a bus with
//! phases {a, c} carries 2x2 shunt and voltage blocks, never zero-padded
//! 3x3 ones.

mod phase;
mod topology;
mod units;
mod validate;

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::CMat;

pub use phase::{Phase, PhaseSet};
pub use topology::{radial_order, Branch, BranchKind, TopologyOrder};
pub use units::{to_per_unit, to_physical, z_base_ohm, Units};
pub use validate::{validate_feeder, Issue, IssueKind, ValidationReport};

pub const TAP_MIN: i32 = -16;
pub const TAP_MAX: i32 = 16;
pub const TAP_STEP: f64 = 0.00625;
pub const DEFAULT_V_FLOOR: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Voltage region key into [`FeederModel::v_base_kv`].
    pub region: String,
    /// Voltage magnitude bounds (p.u.); squared when turned into constraints.
    pub vmin: f64,
    pub vmax: f64,
    /// Shunt admittance, |phases| square.
    pub shunt: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSegment {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: PhaseSet,
    /// Series impedance, |phases| square and symmetric.
    pub z: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorBank {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: PhaseSet,
    pub taps: Vec<i32>,
    pub z: CMat,
}

impl RegulatorBank {
    pub fn ratio(&self) -> Vec<f64> {
        self.taps.iter().map(|&t| tap_ratio(t)).collect()
    }

    /// `ratio · ratioᵀ`, the Hadamard factor on the secondary voltage block.
    pub fn r_matrix(&self) -> DMatrix<f64> {
        let r = self.ratio();
        DMatrix::from_fn(r.len(), r.len(), |i, j| r[i] * r[j])
    }
}

pub fn tap_ratio(tap: i32) -> f64 {
    1.0 + TAP_STEP * tap as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connection {
    Wye,
    Delta,
}

/// Constant-impedance, constant-current and constant-power shares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipWeights {
    pub z: f64,
    pub i: f64,
    pub p: f64,
}

impl ZipWeights {
    pub const CONSTANT_POWER: ZipWeights = ZipWeights { z: 0.0, i: 0.0, p: 1.0 };
    pub const CONSTANT_CURRENT: ZipWeights = ZipWeights { z: 0.0, i: 1.0, p: 0.0 };
    pub const CONSTANT_IMPEDANCE: ZipWeights = ZipWeights { z: 1.0, i: 0.0, p: 0.0 };

    pub fn scale(&self, v: f64) -> f64 {
        self.z * v * v + self.i * v + self.p
    }
}

/// A ZIP load. Wye loads carry one nominal power per phase; delta loads one
/// per phase pair: a two-phase set {p, q} is the single pair pq, a full set
/// is the pairs ab, bc, ca in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipLoad {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    pub connection: Connection,
    pub s_nominal: Vec<Complex64>,
    pub zip: ZipWeights,
    pub v_floor: f64,
}

impl ZipLoad {
    /// Phase pairs of a delta load as (from, to) phases.
    pub fn delta_pairs(&self) -> Vec<(Phase, Phase)> {
        let ph: Vec<Phase> = self.phases.iter().collect();
        match ph.len() {
            2 => vec![(ph[0], ph[1])],
            3 => vec![(Phase::A, Phase::B), (Phase::B, Phase::C), (Phase::C, Phase::A)],
            _ => Vec::new(),
        }
    }

    pub fn expected_len(&self) -> usize {
        match self.connection {
            Connection::Wye => self.phases.len(),
            Connection::Delta => self.delta_pairs().len(),
        }
    }

    pub fn is_constant_power_wye(&self) -> bool {
        self.connection == Connection::Wye && self.zip.p == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DgCost {
    /// `a1·P + a2·P²` on the three-phase total (kW, $/kWh, $/kWh²).
    Quadratic { a1: f64, a2: f64 },
    /// Flat price on the magnitude of a unidirectional dispatch (storage
    /// charging is priced on the absorbed power).
    Flat { price: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedGenerator {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    /// Per-phase real-power limits; negative values absorb (storage charging).
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub power_factor: f64,
    pub cost: DgCost,
    pub balance_beta: Option<f64>,
}

impl DistributedGenerator {
    /// `Q / P` at the fixed power factor.
    pub fn q_ratio(&self) -> f64 {
        self.power_factor.acos().tan()
    }

    /// Sign of the priced direction for flat-priced units: +1 for
    /// generation, -1 for absorption.
    pub fn flat_direction(&self) -> Option<f64> {
        if self.p_min.iter().all(|&p| p >= 0.0) {
            Some(1.0)
        } else if self.p_max.iter().all(|&p| p <= 0.0) {
            Some(-1.0)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceEquivalent {
    pub bus: String,
    /// Per-phase voltage phasors (p.u.).
    pub v_ref: Vec<Complex64>,
    /// Price of energy bought at the substation ($/kWh).
    pub grid_price: f64,
}

/// Immutable description of a feeder. All quantities are per-unit when
/// `units == Units::PerUnit` (the state every solver expects).
#[derive(Debug, Clone, PartialEq)]
pub struct FeederModel {
    pub name: String,
    pub units: Units,
    /// Three-phase base power (kVA).
    pub s_base_kva: f64,
    /// Line-to-line base voltage per region (kV).
    pub v_base_kv: BTreeMap<String, f64>,
    pub buses: Vec<Bus>,
    pub lines: Vec<LineSegment>,
    pub regulators: Vec<RegulatorBank>,
    pub loads: Vec<ZipLoad>,
    pub generators: Vec<DistributedGenerator>,
    pub source: SourceEquivalent,
}

impl FeederModel {
    pub fn bus_index(&self) -> HashMap<&str, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect()
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    /// Per-phase power base (kVA): one third of the three-phase base.
    pub fn phase_base_kva(&self) -> f64 {
        self.s_base_kva / 3.0
    }

    pub fn generator(&self, id: &str) -> Option<&DistributedGenerator> {
        self.generators.iter().find(|g| g.id == id)
    }

    pub fn regulator_mut(&mut self, id: &str) -> Option<&mut RegulatorBank> {
        self.regulators.iter_mut().find(|r| r.id == id)
    }

    /// Copy with every bus's source phasors scaled to magnitude `v_pu`.
    pub fn with_source_magnitude(&self, v_pu: f64) -> FeederModel {
        let mut m = self.clone();
        for v in &mut m.source.v_ref {
            *v = Complex64::from_polar(v_pu, v.arg());
        }
        m
    }

    /// Copy with uniform voltage bounds on every bus.
    pub fn with_bounds(&self, vmin: f64, vmax: f64) -> FeederModel {
        let mut m = self.clone();
        for b in &mut m.buses {
            b.vmin = vmin;
            b.vmax = vmax;
        }
        m
    }
}
