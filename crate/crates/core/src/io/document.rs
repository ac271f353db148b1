//! On-disk feeder schema (TOML) and its conversion to [`FeederModel`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, polar, CMat};
use crate::network::{
    to_per_unit, z_base_ohm, Bus, Connection, DgCost, DistributedGenerator, FeederModel,
    LineSegment, PhaseSet, RegulatorBank, SourceEquivalent, Units, ZipLoad, ZipWeights, DEFAULT_V_FLOOR,
    TAP_MAX, TAP_MIN,
};

pub const SCHEMA_VERSION: u32 = 1;
const FEET_PER_MILE: f64 = 5280.0;

/// Complex matrix as rows of `[re, im]` pairs.
pub type ZDoc = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederDocument {
    pub schema_version: u32,
    pub meta: MetaDoc,
    pub source: SourceDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linecodes: Vec<LinecodeDoc>,
    pub buses: Vec<BusDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<LineDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regulators: Vec<RegulatorDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<LoadDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capacitors: Vec<CapacitorDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shunts: Vec<ShuntDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<GeneratorDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnitsDoc {
    /// Ω, µS, kW/kvar per phase.
    #[default]
    Physical,
    PerUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaDoc {
    pub name: String,
    #[serde(default)]
    pub units: UnitsDoc,
    pub s_base_kva: f64,
    /// Line-to-line base voltage per region.
    pub v_base_kv: BTreeMap<String, f64>,
    /// Default bounds for buses that do not set their own.
    pub vmin: f64,
    pub vmax: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDoc {
    pub bus: String,
    /// Magnitude per source phase, or one value for all.
    pub v_pu: Vec<f64>,
    /// Angle per phase; defaults to the balanced set 0/−120/120.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<Vec<f64>>,
    #[serde(default = "default_price")]
    pub grid_price: f64,
}

fn default_price() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinecodeDoc {
    pub id: String,
    pub phases: PhaseSet,
    pub z_ohm_per_mile: ZDoc,
    /// Shunt susceptance, µS per mile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_us_per_mile: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusDoc {
    pub id: String,
    pub phases: PhaseSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmax: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LineDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhaseSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linecode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_ft: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_ohm: Option<ZDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_pu: Option<ZDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: PhaseSet,
    pub taps: Vec<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_ohm: Option<ZDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_pu: Option<ZDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionDoc {
    #[default]
    Wye,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoadModelDoc {
    #[default]
    ConstantPower,
    ConstantCurrent,
    ConstantImpedance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDoc {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    #[serde(default)]
    pub connection: ConnectionDoc,
    /// Real power per phase (wye) or per phase pair (delta).
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<LoadModelDoc>,
    /// Explicit `[z, i, p]` shares; overrides `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zip: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitorDoc {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    /// Rated reactive power per phase at nominal voltage.
    pub q: Vec<f64>,
}

/// General shunt admittance matrix, siemens or per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuntDoc {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    pub y: ZDoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CostDoc {
    Quadratic { a1: f64, a2: f64 },
    Flat { price: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDoc {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    pub p_max: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<Vec<f64>>,
    pub power_factor: f64,
    pub cost: CostDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_beta: Option<f64>,
}

fn located(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { path: location.into(), message: message.into() }
}

fn zmat(z: &ZDoc, n: usize, loc: &str) -> Result<CMat> {
    if z.len() != n || z.iter().any(|r| r.len() != n) {
        return Err(located(loc, format!("impedance must be {n}x{n}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| c(z[i][j][0], z[i][j][1])))
}

fn zdoc(m: &CMat) -> ZDoc {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

impl GeneratorDoc {
    pub fn to_model(&self, loc: &str) -> Result<DistributedGenerator> {
        let n = self.phases.len();
        if self.p_max.len() != n {
            return Err(located(format!("{loc}.p_max"), format!("expected {n} values")));
        }
        let p_min = match &self.p_min {
            Some(v) if v.len() != n => return Err(located(format!("{loc}.p_min"), format!("expected {n} values"))),
            Some(v) => v.clone(),
            None => vec![0.0; n],
        };
        Ok(DistributedGenerator {
            id: self.id.clone(),
            bus: self.bus.clone(),
            phases: self.phases,
            p_min,
            p_max: self.p_max.clone(),
            power_factor: self.power_factor,
            cost: match self.cost {
                CostDoc::Quadratic { a1, a2 } => DgCost::Quadratic { a1, a2 },
                CostDoc::Flat { price } => DgCost::Flat { price },
            },
            balance_beta: self.balance_beta,
        })
    }
}

impl FeederDocument {
    /// Builds the model in the document's units; [`crate::io::parse_feeder`]
    /// converts it to per-unit afterwards.
    pub fn to_model(&self) -> Result<FeederModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(located(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let m = &self.meta;
        let units = match m.units {
            UnitsDoc::Physical => Units::Physical,
            UnitsDoc::PerUnit => Units::PerUnit,
        };
        // Buses without a region use `main`, or the only region declared.
        let default_region = if m.v_base_kv.contains_key("main") || m.v_base_kv.len() != 1 {
            "main".to_string()
        } else {
            m.v_base_kv.keys().next().cloned().unwrap_or_default()
        };
        if m.v_base_kv.is_empty() {
            return Err(located("meta.v_base_kv", "at least one region is required"));
        }

        let mut buses = Vec::with_capacity(self.buses.len());
        let mut bus_pos = BTreeMap::new();
        for (k, b) in self.buses.iter().enumerate() {
            let region = b.region.clone().unwrap_or_else(|| default_region.clone());
            if !m.v_base_kv.contains_key(&region) {
                return Err(located(format!("buses[{k}] ({}).region", b.id), format!("unknown region `{region}`")));
            }
            let n = b.phases.len();
            bus_pos.insert(b.id.clone(), k);
            buses.push(Bus {
                id: b.id.clone(),
                phases: b.phases,
                region,
                vmin: b.vmin.unwrap_or(m.vmin),
                vmax: b.vmax.unwrap_or(m.vmax),
                shunt: CMat::zeros(n, n),
            });
        }
        let bus_of = |id: &str, loc: &str| -> Result<usize> {
            bus_pos.get(id).copied().ok_or_else(|| located(loc, format!("unknown bus `{id}`")))
        };
        let bus_kv: Vec<f64> = buses.iter().map(|b| m.v_base_kv[&b.region]).collect();
        let z_base = |bus: usize| z_base_ohm(bus_kv[bus], m.s_base_kva);
        let kv_phase = |bus: usize| bus_kv[bus] / 3f64.sqrt();

        let codes: BTreeMap<&str, &LinecodeDoc> = self.linecodes.iter().map(|l| (l.id.as_str(), l)).collect();
        let mut lines = Vec::with_capacity(self.lines.len());
        for (k, l) in self.lines.iter().enumerate() {
            let loc = format!("lines[{k}] ({})", l.id);
            let from = bus_of(&l.from, &format!("{loc}.from"))?;
            bus_of(&l.to, &format!("{loc}.to"))?;
            let (phases, z, b_total) = match (&l.linecode, &l.z_ohm, &l.z_pu) {
                (Some(code), None, None) => {
                    let lc = codes
                        .get(code.as_str())
                        .ok_or_else(|| located(format!("{loc}.linecode"), format!("unknown linecode `{code}`")))?;
                    let len_ft = l
                        .length_ft
                        .ok_or_else(|| located(format!("{loc}.length_ft"), "required with a linecode"))?;
                    let miles = len_ft / FEET_PER_MILE;
                    let phases = l.phases.unwrap_or(lc.phases);
                    let idx = phases.positions_in(lc.phases).ok_or_else(|| {
                        located(format!("{loc}.phases"), format!("`{phases}` not carried by linecode `{code}`"))
                    })?;
                    let full = zmat(&lc.z_ohm_per_mile, lc.phases.len(), &format!("linecodes ({code})"))?;
                    let z = CMat::from_fn(idx.len(), idx.len(), |i, j| full[(idx[i], idx[j])] * miles);
                    let b = match &lc.b_us_per_mile {
                        Some(bm) => {
                            let n = lc.phases.len();
                            if bm.len() != n || bm.iter().any(|r| r.len() != n) {
                                return Err(located(format!("linecodes ({code}).b_us_per_mile"), format!("must be {n}x{n}")));
                            }
                            Some(CMat::from_fn(idx.len(), idx.len(), |i, j| {
                                c(0.0, bm[idx[i]][idx[j]] * 1e-6 * miles)
                            }))
                        }
                        None => None,
                    };
                    (phases, z, b)
                }
                (None, Some(z), None) => {
                    let phases = l.phases.ok_or_else(|| located(format!("{loc}.phases"), "required with z_ohm"))?;
                    let z = zmat(z, phases.len(), &format!("{loc}.z_ohm"))?;
                    let z = if units == Units::PerUnit { z.scale(1.0 / z_base(from)) } else { z };
                    (phases, z, None)
                }
                (None, None, Some(z)) => {
                    let phases = l.phases.ok_or_else(|| located(format!("{loc}.phases"), "required with z_pu"))?;
                    let z = zmat(z, phases.len(), &format!("{loc}.z_pu"))?;
                    let z = if units == Units::Physical { z.scale(z_base(from)) } else { z };
                    (phases, z, None)
                }
                _ => return Err(located(&loc, "give exactly one of linecode, z_ohm, z_pu")),
            };
            if let Some(b) = b_total {
                // Half the line charging at each end.
                let b = if units == Units::PerUnit { b.scale(z_base(from)) } else { b };
                for end in [&l.from, &l.to] {
                    let bi = bus_pos[end.as_str()];
                    let pos = phases.positions_in(buses[bi].phases).ok_or_else(|| {
                        located(&loc, format!("phases `{phases}` not present at bus `{end}`"))
                    })?;
                    for (i, &pi) in pos.iter().enumerate() {
                        for (j, &pj) in pos.iter().enumerate() {
                            buses[bi].shunt[(pi, pj)] += b[(i, j)] * 0.5;
                        }
                    }
                }
            }
            lines.push(LineSegment { id: l.id.clone(), from: l.from.clone(), to: l.to.clone(), phases, z });
        }

        let mut regulators = Vec::with_capacity(self.regulators.len());
        for (k, r) in self.regulators.iter().enumerate() {
            let loc = format!("regulators[{k}] ({})", r.id);
            let from = bus_of(&r.from, &format!("{loc}.from"))?;
            bus_of(&r.to, &format!("{loc}.to"))?;
            if let Some(&tap) = r.taps.iter().find(|&&t| !(TAP_MIN..=TAP_MAX).contains(&t)) {
                return Err(located(
                    format!("{loc}.taps"),
                    format!("regulator `{}` tap {tap} outside [{TAP_MIN}, {TAP_MAX}]", r.id),
                ));
            }
            if r.taps.len() != r.phases.len() {
                return Err(located(format!("{loc}.taps"), format!("expected {} taps", r.phases.len())));
            }
            let n = r.phases.len();
            let z = match (&r.z_ohm, &r.z_pu) {
                (None, None) => CMat::zeros(n, n),
                (Some(z), None) => {
                    let z = zmat(z, n, &format!("{loc}.z_ohm"))?;
                    if units == Units::PerUnit { z.scale(1.0 / z_base(from)) } else { z }
                }
                (None, Some(z)) => {
                    let z = zmat(z, n, &format!("{loc}.z_pu"))?;
                    if units == Units::Physical { z.scale(z_base(from)) } else { z }
                }
                _ => return Err(located(&loc, "give at most one of z_ohm, z_pu")),
            };
            regulators.push(RegulatorBank {
                id: r.id.clone(),
                from: r.from.clone(),
                to: r.to.clone(),
                phases: r.phases,
                taps: r.taps.clone(),
                z,
            });
        }

        let mut loads = Vec::with_capacity(self.loads.len());
        for (k, l) in self.loads.iter().enumerate() {
            let loc = format!("loads[{k}] ({})", l.id);
            bus_of(&l.bus, &format!("{loc}.bus"))?;
            if l.p.len() != l.q.len() {
                return Err(located(&loc, "p and q lengths differ"));
            }
            let zip = match (l.zip, l.model.unwrap_or_default()) {
                (Some([z, i, p]), _) => ZipWeights { z, i, p },
                (None, LoadModelDoc::ConstantPower) => ZipWeights::CONSTANT_POWER,
                (None, LoadModelDoc::ConstantCurrent) => ZipWeights::CONSTANT_CURRENT,
                (None, LoadModelDoc::ConstantImpedance) => ZipWeights::CONSTANT_IMPEDANCE,
            };
            loads.push(ZipLoad {
                id: l.id.clone(),
                bus: l.bus.clone(),
                phases: l.phases,
                connection: match l.connection {
                    ConnectionDoc::Wye => Connection::Wye,
                    ConnectionDoc::Delta => Connection::Delta,
                },
                s_nominal: l.p.iter().zip(&l.q).map(|(&p, &q)| c(p, q)).collect(),
                zip,
                v_floor: l.v_floor.unwrap_or(DEFAULT_V_FLOOR),
            });
        }

        for (k, cap) in self.capacitors.iter().enumerate() {
            let loc = format!("capacitors[{k}] ({})", cap.id);
            let bi = bus_of(&cap.bus, &format!("{loc}.bus"))?;
            if cap.q.len() != cap.phases.len() {
                return Err(located(format!("{loc}.q"), format!("expected {} values", cap.phases.len())));
            }
            let pos = cap
                .phases
                .positions_in(buses[bi].phases)
                .ok_or_else(|| located(format!("{loc}.phases"), "phases not present at bus"))?;
            for (&p, &q) in pos.iter().zip(&cap.q) {
                let y = match units {
                    // kvar at rated kV: B = Q / V².
                    Units::Physical => q / (1000.0 * kv_phase(bi) * kv_phase(bi)),
                    Units::PerUnit => q,
                };
                buses[bi].shunt[(p, p)] += c(0.0, y);
            }
        }

        for (k, sh) in self.shunts.iter().enumerate() {
            let loc = format!("shunts[{k}] ({})", sh.id);
            let bi = bus_of(&sh.bus, &format!("{loc}.bus"))?;
            let y = zmat(&sh.y, sh.phases.len(), &format!("{loc}.y"))?;
            let pos = sh
                .phases
                .positions_in(buses[bi].phases)
                .ok_or_else(|| located(format!("{loc}.phases"), "phases not present at bus"))?;
            for (i, &pi) in pos.iter().enumerate() {
                for (j, &pj) in pos.iter().enumerate() {
                    buses[bi].shunt[(pi, pj)] += y[(i, j)];
                }
            }
        }

        let generators = self
            .generators
            .iter()
            .enumerate()
            .map(|(k, g)| g.to_model(&format!("generators[{k}] ({})", g.id)))
            .collect::<Result<Vec<_>>>()?;

        let src = bus_of(&self.source.bus, "source.bus")?;
        let n_src = buses[src].phases.len();
        let mags = match self.source.v_pu.len() {
            1 => vec![self.source.v_pu[0]; n_src],
            n if n == n_src => self.source.v_pu.clone(),
            _ => return Err(located("source.v_pu", format!("expected 1 or {n_src} values"))),
        };
        let angles = match &self.source.angle_deg {
            Some(a) if a.len() == n_src => a.clone(),
            Some(_) => return Err(located("source.angle_deg", format!("expected {n_src} values"))),
            None => buses[src].phases.iter().map(|p| -120.0 * p.index() as f64).map(wrap_deg).collect(),
        };
        let v_ref = mags.iter().zip(&angles).map(|(&m, &a)| polar(m, a)).collect();

        Ok(FeederModel {
            name: m.name.clone(),
            units,
            s_base_kva: m.s_base_kva,
            v_base_kv: m.v_base_kv.clone(),
            buses,
            lines,
            regulators,
            loads,
            generators,
            source: SourceEquivalent { bus: self.source.bus.clone(), v_ref, grid_price: self.source.grid_price },
        })
    }

    /// A per-unit document carrying the model's data. Line charging and
    /// capacitors come back as one `shunts` entry per bus.
    pub fn from_per_unit_model(model: &FeederModel) -> Result<FeederDocument> {
        let model = to_per_unit(model)?;
        Ok(FeederDocument {
            schema_version: SCHEMA_VERSION,
            meta: MetaDoc {
                name: model.name.clone(),
                units: UnitsDoc::PerUnit,
                s_base_kva: model.s_base_kva,
                v_base_kv: model.v_base_kv.clone(),
                vmin: model.buses.first().map_or(0.9, |b| b.vmin),
                vmax: model.buses.first().map_or(1.1, |b| b.vmax),
                description: None,
            },
            source: SourceDoc {
                bus: model.source.bus.clone(),
                v_pu: model.source.v_ref.iter().map(|v| v.norm()).collect(),
                angle_deg: Some(model.source.v_ref.iter().map(|v| v.arg().to_degrees()).collect()),
                grid_price: model.source.grid_price,
            },
            linecodes: Vec::new(),
            buses: model
                .buses
                .iter()
                .map(|b| BusDoc {
                    id: b.id.clone(),
                    phases: b.phases,
                    region: Some(b.region.clone()),
                    vmin: Some(b.vmin),
                    vmax: Some(b.vmax),
                })
                .collect(),
            lines: model
                .lines
                .iter()
                .map(|l| LineDoc {
                    id: l.id.clone(),
                    from: l.from.clone(),
                    to: l.to.clone(),
                    phases: Some(l.phases),
                    z_pu: Some(zdoc(&l.z)),
                    ..LineDoc::default()
                })
                .collect(),
            regulators: model
                .regulators
                .iter()
                .map(|r| RegulatorDoc {
                    id: r.id.clone(),
                    from: r.from.clone(),
                    to: r.to.clone(),
                    phases: r.phases,
                    taps: r.taps.clone(),
                    z_ohm: None,
                    z_pu: Some(zdoc(&r.z)),
                })
                .collect(),
            loads: model
                .loads
                .iter()
                .map(|l| LoadDoc {
                    id: l.id.clone(),
                    bus: l.bus.clone(),
                    phases: l.phases,
                    connection: match l.connection {
                        Connection::Wye => ConnectionDoc::Wye,
                        Connection::Delta => ConnectionDoc::Delta,
                    },
                    p: l.s_nominal.iter().map(|s| s.re).collect(),
                    q: l.s_nominal.iter().map(|s| s.im).collect(),
                    model: None,
                    zip: Some([l.zip.z, l.zip.i, l.zip.p]),
                    v_floor: Some(l.v_floor),
                })
                .collect(),
            capacitors: Vec::new(),
            shunts: model
                .buses
                .iter()
                .filter(|b| b.shunt.iter().any(|y| y.norm() > 0.0))
                .map(|b| ShuntDoc { id: format!("shunt-{}", b.id), bus: b.id.clone(), phases: b.phases, y: zdoc(&b.shunt) })
                .collect(),
            generators: model
                .generators
                .iter()
                .map(|g| GeneratorDoc {
                    id: g.id.clone(),
                    bus: g.bus.clone(),
                    phases: g.phases,
                    p_max: g.p_max.clone(),
                    p_min: Some(g.p_min.clone()),
                    power_factor: g.power_factor,
                    cost: match g.cost {
                        DgCost::Quadratic { a1, a2 } => CostDoc::Quadratic { a1, a2 },
                        DgCost::Flat { price } => CostDoc::Flat { price },
                    },
                    balance_beta: g.balance_beta,
                })
                .collect(),
        })
    }
}

fn wrap_deg(a: f64) -> f64 {
    if a < -180.0 {
        a + 360.0
    } else {
        a
    }
}
