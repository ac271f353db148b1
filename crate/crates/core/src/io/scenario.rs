//! Scenario files: a feeder reference plus operating-point overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::document::GeneratorDoc;
use crate::error::{Error, Result};
use crate::network::{FeederModel, TAP_MAX, TAP_MIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Built-in feeder name or a path relative to the scenario file.
    pub feeder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_v_pu: Option<f64>,
    /// Uniform `[vmin, vmax]` on every bus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    /// Buses whose voltage bounds are not enforced.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exempt: Vec<String>,
    /// Tap overrides by regulator id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub taps: BTreeMap<String, Vec<i32>>,
    /// Sets every regulator to the neutral tap.
    #[serde(default)]
    pub bypass_regulators: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_price: Option<f64>,
    /// Line or regulator whose sending-end flow is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_segment: Option<String>,
    /// Extra generators, in kW per phase.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<GeneratorDoc>,
    /// Published values the scenario is compared against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ReferenceData {
    /// Head-segment flow per phase: `[p_kw, q_kvar]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub head_flow_kw: Vec<[f64; 2]>,
    /// Voltage magnitudes by bus, one entry per bus phase.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub voltages_pu: BTreeMap<String, Vec<f64>>,
}

fn located(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { path: location.into(), message: message.into() }
}

impl Scenario {
    /// Applies the overrides to a per-unit model.
    pub fn apply(&self, model: &FeederModel) -> Result<FeederModel> {
        if model.units != crate::network::Units::PerUnit {
            return Err(Error::InvalidModel("scenario overrides expect a per-unit model".into()));
        }
        let mut m = model.clone();
        if let Some(v) = self.source_v_pu {
            if !(v > 0.0) {
                return Err(located("source_v_pu", "must be positive"));
            }
            m = m.with_source_magnitude(v);
        }
        if let Some([lo, hi]) = self.bounds {
            if !(lo > 0.0 && lo < hi) {
                return Err(located("bounds", format!("need 0 < vmin < vmax, got [{lo}, {hi}]")));
            }
            m = m.with_bounds(lo, hi);
        }
        if let Some(p) = self.grid_price {
            m.source.grid_price = p;
        }
        if self.bypass_regulators {
            for r in &mut m.regulators {
                r.taps.iter_mut().for_each(|t| *t = 0);
            }
        }
        for (id, taps) in &self.taps {
            let loc = format!("taps.{id}");
            let reg = m
                .regulator_mut(id)
                .ok_or_else(|| located(&loc, format!("unknown regulator `{id}`")))?;
            if taps.len() != reg.phases.len() {
                return Err(located(&loc, format!("expected {} taps", reg.phases.len())));
            }
            if let Some(t) = taps.iter().find(|t| !(TAP_MIN..=TAP_MAX).contains(*t)) {
                return Err(located(&loc, format!("regulator `{id}` tap {t} outside [{TAP_MIN}, {TAP_MAX}]")));
            }
            reg.taps = taps.clone();
        }
        for bus in &self.exempt {
            if m.bus(bus).is_none() {
                return Err(located("exempt", format!("unknown bus `{bus}`")));
            }
        }
        if let Some(seg) = &self.head_segment {
            let known = m.lines.iter().any(|l| &l.id == seg) || m.regulators.iter().any(|r| &r.id == seg);
            if !known {
                return Err(located("head_segment", format!("unknown segment `{seg}`")));
            }
        }
        let base = m.phase_base_kva();
        for (k, g) in self.generators.iter().enumerate() {
            let mut dg = g.to_model(&format!("generators[{k}] ({})", g.id))?;
            dg.p_min.iter_mut().chain(dg.p_max.iter_mut()).for_each(|p| *p /= base);
            if m.generator(&dg.id).is_some() {
                return Err(located(format!("generators[{k}]"), format!("duplicate generator `{}`", dg.id)));
            }
            m.generators.push(dg);
        }
        let report = crate::network::validate_feeder(&m);
        if let Some(issue) = report.issues.first() {
            return Err(located(format!("scenario {}: {}", self.name, issue.location), issue.message.clone()));
        }
        Ok(m)
    }
}
