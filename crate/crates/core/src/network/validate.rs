use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{radial_order, Connection, DgCost, FeederModel, PhaseSet, TAP_MAX, TAP_MIN};
use crate::error::Error;
use crate::linalg::{symmetric_asymmetry, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    DuplicateId,
    UnknownReference,
    PhaseSubset,
    Dimension,
    NotRadial,
    Disconnected,
    VoltageBounds,
    Shunt,
    Impedance,
    TapRange,
    ZipWeights,
    Generator,
    Source,
    Base,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub kind: IssueKind,
    /// e.g. `load 671` or `line 632-645`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    fn push(&mut self, kind: IssueKind, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue { kind, location: location.into(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            writeln!(f, "{i}")?;
        }
        Ok(())
    }
}

fn square_of(m: &CMat, n: usize) -> bool {
    m.nrows() == n && m.ncols() == n
}

/// Checks every model invariant. Diagnostics are data: the report is empty
/// iff the model is well formed.
pub fn validate_feeder(model: &FeederModel) -> ValidationReport {
    let mut rep = ValidationReport::default();

    if !(model.s_base_kva > 0.0) {
        rep.push(IssueKind::Base, "meta", "base power must be positive");
    }
    for (region, kv) in &model.v_base_kv {
        if !(*kv > 0.0) {
            rep.push(IssueKind::Base, format!("region {region}"), "base voltage must be positive");
        }
    }

    let mut phases: HashMap<&str, PhaseSet> = HashMap::new();
    for b in &model.buses {
        let loc = format!("bus {}", b.id);
        if phases.insert(b.id.as_str(), b.phases).is_some() {
            rep.push(IssueKind::DuplicateId, &loc, "duplicate bus id");
        }
        if !model.v_base_kv.contains_key(&b.region) {
            rep.push(IssueKind::Base, &loc, format!("no base voltage for region `{}`", b.region));
        }
        if !(b.vmin > 0.0 && b.vmin < b.vmax) {
            rep.push(
                IssueKind::VoltageBounds,
                &loc,
                format!("need 0 < vmin < vmax, got [{}, {}]", b.vmin, b.vmax),
            );
        }
        if !square_of(&b.shunt, b.phases.len()) {
            rep.push(IssueKind::Dimension, &loc, "shunt dimension differs from phase count");
        } else {
            if symmetric_asymmetry(&b.shunt) > 1e-12 {
                rep.push(IssueKind::Shunt, &loc, "shunt admittance is not symmetric");
            }
            if (0..b.phases.len()).any(|i| b.shunt[(i, i)].re < 0.0) {
                rep.push(IssueKind::Shunt, &loc, "shunt conductance is negative");
            }
        }
    }

    let mut branch_ids = HashSet::new();
    let mut parent_count: HashMap<&str, usize> = HashMap::new();
    let branches = model
        .lines
        .iter()
        .map(|l| ("line", &l.id, &l.from, &l.to, l.phases, &l.z))
        .chain(
            model
                .regulators
                .iter()
                .map(|r| ("regulator", &r.id, &r.from, &r.to, r.phases, &r.z)),
        );
    for (kind, id, from, to, ph, z) in branches {
        let loc = format!("{kind} {id}");
        if !branch_ids.insert(id.as_str()) {
            rep.push(IssueKind::DuplicateId, &loc, "duplicate branch id");
        }
        for end in [from, to] {
            match phases.get(end.as_str()) {
                None => rep.push(IssueKind::UnknownReference, &loc, format!("unknown bus `{end}`")),
                Some(bp) if !ph.is_subset_of(*bp) => rep.push(
                    IssueKind::PhaseSubset,
                    &loc,
                    format!("phases {ph} not available at bus `{end}` ({bp})"),
                ),
                _ => {}
            }
        }
        if let Some(tp) = phases.get(to.as_str()) {
            if *tp != ph {
                rep.push(
                    IssueKind::PhaseSubset,
                    &loc,
                    format!("bus `{to}` has phases {tp} but is fed by phases {ph}"),
                );
            }
        }
        *parent_count.entry(to.as_str()).or_default() += 1;
        if !square_of(z, ph.len()) {
            rep.push(IssueKind::Dimension, &loc, "impedance dimension differs from phase count");
        } else if symmetric_asymmetry(z) > 1e-12 * (1.0 + z.iter().map(|x| x.norm()).fold(0.0, f64::max)) {
            rep.push(IssueKind::Impedance, &loc, "impedance matrix is not symmetric");
        }
    }

    for r in &model.regulators {
        let loc = format!("regulator {}", r.id);
        if r.taps.len() != r.phases.len() {
            rep.push(IssueKind::Dimension, &loc, "one tap per phase required");
        }
        for &t in &r.taps {
            if !(TAP_MIN..=TAP_MAX).contains(&t) {
                rep.push(IssueKind::TapRange, &loc, format!("tap {t} outside [{TAP_MIN}, {TAP_MAX}]"));
            }
        }
    }

    let mut load_ids = HashSet::new();
    for l in &model.loads {
        let loc = format!("load {}", l.id);
        if !load_ids.insert(l.id.as_str()) {
            rep.push(IssueKind::DuplicateId, &loc, "duplicate load id");
        }
        match phases.get(l.bus.as_str()) {
            None => rep.push(IssueKind::UnknownReference, &loc, format!("unknown bus `{}`", l.bus)),
            Some(bp) if !l.phases.is_subset_of(*bp) => rep.push(
                IssueKind::PhaseSubset,
                &loc,
                format!("phases {} not available at bus `{}` ({bp})", l.phases, l.bus),
            ),
            _ => {}
        }
        if l.connection == Connection::Delta && l.phases.len() < 2 {
            rep.push(IssueKind::Dimension, &loc, "delta load needs at least two phases");
        }
        if l.s_nominal.len() != l.expected_len() {
            rep.push(
                IssueKind::Dimension,
                &loc,
                format!("expected {} nominal powers, got {}", l.expected_len(), l.s_nominal.len()),
            );
        }
        let w = l.zip;
        if w.z < 0.0 || w.i < 0.0 || w.p < 0.0 || (w.z + w.i + w.p - 1.0).abs() > 1e-12 {
            rep.push(
                IssueKind::ZipWeights,
                &loc,
                format!("ZIP weights ({}, {}, {}) must be non-negative and sum to 1", w.z, w.i, w.p),
            );
        }
        if !(l.v_floor > 0.0 && l.v_floor < 1.0) {
            rep.push(IssueKind::ZipWeights, &loc, format!("v_floor {} outside (0, 1)", l.v_floor));
        }
    }

    let mut gen_ids = HashSet::new();
    for g in &model.generators {
        let loc = format!("generator {}", g.id);
        if !gen_ids.insert(g.id.as_str()) {
            rep.push(IssueKind::DuplicateId, &loc, "duplicate generator id");
        }
        match phases.get(g.bus.as_str()) {
            None => rep.push(IssueKind::UnknownReference, &loc, format!("unknown bus `{}`", g.bus)),
            Some(bp) if !g.phases.is_subset_of(*bp) => rep.push(
                IssueKind::PhaseSubset,
                &loc,
                format!("phases {} not available at bus `{}` ({bp})", g.phases, g.bus),
            ),
            _ => {}
        }
        if g.p_min.len() != g.phases.len() || g.p_max.len() != g.phases.len() {
            rep.push(IssueKind::Dimension, &loc, "one power limit per phase required");
        }
        if g.p_min.iter().zip(&g.p_max).any(|(lo, hi)| lo > hi) {
            rep.push(IssueKind::Generator, &loc, "p_min exceeds p_max");
        }
        if !(g.power_factor > 0.0 && g.power_factor <= 1.0) {
            rep.push(IssueKind::Generator, &loc, "power factor outside (0, 1]");
        }
        if let Some(beta) = g.balance_beta {
            if !(beta > 0.0 && beta < 1.0) {
                rep.push(IssueKind::Generator, &loc, "balance beta outside (0, 1)");
            }
            if !g.phases.is_three_phase() {
                rep.push(IssueKind::Generator, &loc, "balance band requires a three-phase unit");
            }
        }
        match g.cost {
            DgCost::Quadratic { a2, .. } if a2 < 0.0 => {
                rep.push(IssueKind::Generator, &loc, "quadratic cost coefficient must be >= 0")
            }
            DgCost::Flat { .. } if g.flat_direction().is_none() => rep.push(
                IssueKind::Generator,
                &loc,
                "flat-priced unit must either only generate or only absorb",
            ),
            _ => {}
        }
    }

    let src = &model.source;
    match phases.get(src.bus.as_str()) {
        None => rep.push(IssueKind::UnknownReference, "source", format!("unknown bus `{}`", src.bus)),
        Some(bp) => {
            if src.v_ref.len() != bp.len() {
                rep.push(IssueKind::Source, "source", "one reference phasor per source phase required");
            }
            if parent_count.contains_key(src.bus.as_str()) {
                rep.push(IssueKind::NotRadial, "source", "source bus is fed by a branch");
            }
        }
    }
    if src.v_ref.iter().any(|v| !(v.norm() > 0.0)) {
        rep.push(IssueKind::Source, "source", "reference voltage magnitude must be positive");
    }

    for (bus, count) in &parent_count {
        if *count > 1 {
            rep.push(IssueKind::NotRadial, format!("bus {bus}"), "not radial: bus has several feeding branches");
        }
    }
    if !rep.has(IssueKind::UnknownReference) && !rep.has(IssueKind::DuplicateId) {
        match radial_order(model) {
            Ok(_) => {}
            Err(Error::NotRadial(msg)) => {
                if !rep.has(IssueKind::NotRadial) {
                    rep.push(IssueKind::NotRadial, "topology", format!("not radial: {msg}"));
                }
            }
            Err(Error::Disconnected(bus)) => {
                rep.push(IssueKind::Disconnected, format!("bus {bus}"), "disconnected from the source")
            }
            Err(e) => rep.push(IssueKind::NotRadial, "topology", e.to_string()),
        }
    }
    rep
}
