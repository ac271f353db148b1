//! Per-unit conversion.
//!
//! Three-phase base power, line-to-line base voltage:
//! `Z_base = V_LL² / S_3φ`. Phase voltages are per-unit on `V_LL/√3`, so
//! per-phase powers are per-unit on `S_3φ/3`. Physical units are ohms,
//! siemens, kW/kvar per phase (per pair for delta loads). Voltage bounds
//! and source phasors are always per-unit.

use std::collections::HashMap;

use super::FeederModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    PerUnit,
    Physical,
}

/// Impedance base (Ω) for a line-to-line voltage in kV and power in kVA.
pub fn z_base_ohm(v_ll_kv: f64, s_base_kva: f64) -> f64 {
    v_ll_kv * v_ll_kv * 1000.0 / s_base_kva
}

struct Bases {
    z_base: HashMap<String, f64>,
    bus_region: HashMap<String, String>,
    s_phase: f64,
}

impl Bases {
    fn of(model: &FeederModel) -> Result<Bases> {
        if !(model.s_base_kva > 0.0) {
            return Err(Error::InvalidModel(format!(
                "base power must be positive, got {}",
                model.s_base_kva
            )));
        }
        let mut z_base = HashMap::new();
        for (region, &kv) in &model.v_base_kv {
            if !(kv > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "base voltage for region `{region}` must be positive"
                )));
            }
            z_base.insert(region.clone(), z_base_ohm(kv, model.s_base_kva));
        }
        let bus_region = model
            .buses
            .iter()
            .map(|b| (b.id.clone(), b.region.clone()))
            .collect();
        Ok(Bases { z_base, bus_region, s_phase: model.s_base_kva / 3.0 })
    }

    fn z_at_bus(&self, bus: &str) -> Result<f64> {
        let region = self
            .bus_region
            .get(bus)
            .ok_or_else(|| Error::UnknownId { kind: "bus", id: bus.to_string() })?;
        self.z_base
            .get(region)
            .copied()
            .ok_or_else(|| Error::MissingBase(region.clone()))
    }
}

/// Converts a physical-unit model to per-unit. Already per-unit input is
/// returned unchanged.
pub fn to_per_unit(model: &FeederModel) -> Result<FeederModel> {
    if model.units == Units::PerUnit {
        return Ok(model.clone());
    }
    convert(model, true)
}

/// Inverse of [`to_per_unit`].
pub fn to_physical(model: &FeederModel) -> Result<FeederModel> {
    if model.units == Units::Physical {
        return Ok(model.clone());
    }
    convert(model, false)
}

fn convert(model: &FeederModel, to_pu: bool) -> Result<FeederModel> {
    let bases = Bases::of(model)?;
    // Multipliers are expressed for the physical → per-unit direction.
    let pick = |f: f64| if to_pu { f } else { 1.0 / f };
    let mut out = model.clone();
    out.units = if to_pu { Units::PerUnit } else { Units::Physical };

    for b in &mut out.buses {
        let zb = bases.z_at_bus(&b.id)?;
        b.shunt = b.shunt.scale(pick(zb));
    }
    for l in &mut out.lines {
        let zb = bases.z_at_bus(&l.from)?;
        l.z = l.z.scale(pick(1.0 / zb));
    }
    for r in &mut out.regulators {
        let zb = bases.z_at_bus(&r.from)?;
        r.z = r.z.scale(pick(1.0 / zb));
    }
    let s = pick(1.0 / bases.s_phase);
    for l in &mut out.loads {
        for x in &mut l.s_nominal {
            *x *= s;
        }
    }
    for g in &mut out.generators {
        g.p_min.iter_mut().chain(g.p_max.iter_mut()).for_each(|p| *p *= s);
    }
    Ok(out)
}
