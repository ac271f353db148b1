//! Deterministic text reports: voltage profile, feeder-head flow, flow
//! error tables and iteration traces.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::{FlowErrorReport, OpfSolution};
use crate::network::FeederModel;
use crate::pf::PowerFlowSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format `{other}` (table, csv, json)")),
        }
    }
}

fn r4(x: f64) -> f64 {
    let r = (x * 1e4).round() / 1e4;
    // Avoid "-0.0000" flip-flops between runs.
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoltageRow {
    pub node: String,
    pub phase: char,
    pub vm_pu: f64,
    pub va_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRow {
    pub segment: String,
    pub phase: char,
    pub p_kw: f64,
    pub q_kvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchRow {
    pub generator: String,
    pub phase: char,
    pub p_kw: f64,
    pub q_kvar: f64,
}

/// One row of the flow-error table; `None` where the phase is absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub case: String,
    pub segment: String,
    pub p_pct: [Option<f64>; 3],
    pub q_pct: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub mismatch: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub branch: String,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Report {
    pub title: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub voltages: Vec<VoltageRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub head_flows: Vec<FlowRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dispatch: Vec<DispatchRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<ErrorRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rank1_gaps: Vec<GapRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
}

fn voltage_rows(model: &FeederModel, ids: &[String], volts: &[Vec<Complex64>]) -> Vec<VoltageRow> {
    let mut rows = Vec::new();
    for (id, v) in ids.iter().zip(volts) {
        let Some(bus) = model.bus(id) else { continue };
        for (ph, x) in bus.phases.iter().zip(v) {
            rows.push(VoltageRow {
                node: id.clone(),
                phase: ph.letter(),
                vm_pu: r4(x.norm()),
                va_deg: r4(x.arg().to_degrees()),
            });
        }
    }
    rows
}

fn flow_rows(model: &FeederModel, segment: &str, flows: &[Complex64]) -> Vec<FlowRow> {
    let phases = model
        .lines
        .iter()
        .find(|l| l.id == segment)
        .map(|l| l.phases)
        .or_else(|| model.regulators.iter().find(|r| r.id == segment).map(|r| r.phases));
    let base = model.phase_base_kva();
    phases
        .map(|ph| {
            ph.iter()
                .zip(flows)
                .map(|(p, s)| FlowRow {
                    segment: segment.to_string(),
                    phase: p.letter(),
                    p_kw: r4(s.re * base),
                    q_kvar: r4(s.im * base),
                })
                .collect()
        })
        .unwrap_or_default()
}

impl Report {
    pub fn from_power_flow(title: &str, model: &FeederModel, sol: &PowerFlowSolution, head: Option<&str>) -> Report {
        let mut r = Report {
            title: title.to_string(),
            status: Some(if sol.converged { "converged".into() } else { "not converged".into() }),
            voltages: voltage_rows(model, &sol.bus_ids, &sol.voltages),
            ..Report::default()
        };
        if let Some(seg) = head {
            if let Some(k) = sol.branch_ids.iter().position(|b| b == seg) {
                r.head_flows = flow_rows(model, seg, &sol.flows[k]);
            }
        }
        r
    }

    pub fn from_opf(title: &str, model: &FeederModel, sol: &OpfSolution, head: Option<&str>) -> Report {
        let base = model.phase_base_kva();
        let mut r = Report {
            title: title.to_string(),
            status: Some(sol.status.tag.to_string()),
            objective: Some(sol.objective),
            voltages: voltage_rows(model, &sol.bus_ids, &sol.voltages),
            rank1_gaps: sol
                .branch_ids
                .iter()
                .zip(&sol.rank1_gaps)
                .map(|(b, g)| GapRow { branch: b.clone(), gap: g.gap })
                .collect(),
            ..Report::default()
        };
        for (g, d) in model.generators.iter().zip(&sol.dispatch) {
            for (ph, &(p, q)) in g.phases.iter().zip(d) {
                r.dispatch.push(DispatchRow {
                    generator: g.id.clone(),
                    phase: ph.letter(),
                    p_kw: r4(p * base),
                    q_kvar: r4(q * base),
                });
            }
        }
        if let Some(seg) = head {
            if let Some(f) = sol.branch_flow(seg) {
                r.head_flows = flow_rows(model, seg, f);
            }
        }
        r
    }

    pub fn push_error(&mut self, case: &str, e: &FlowErrorReport) {
        let mut p = [None; 3];
        let mut q = [None; 3];
        for (k, ph) in e.phases.iter().enumerate() {
            let i = (*ph as u8 - b'a') as usize;
            p[i] = Some(e.p_error_pct[k]);
            q[i] = Some(e.q_error_pct[k]);
        }
        self.errors.push(ErrorRow { case: case.to_string(), segment: e.segment.clone(), p_pct: p, q_pct: q });
    }

    /// Dispatch rows from per-unit `P + jQ` per generator phase.
    pub fn push_dispatch(&mut self, model: &FeederModel, dispatch: &[Vec<Complex64>]) {
        let base = model.phase_base_kva();
        for (g, d) in model.generators.iter().zip(dispatch) {
            for (ph, s) in g.phases.iter().zip(d) {
                self.dispatch.push(DispatchRow {
                    generator: g.id.clone(),
                    phase: ph.letter(),
                    p_kw: r4(s.re * base),
                    q_kvar: r4(s.im * base),
                });
            }
        }
    }

    pub fn push_trace(&mut self, iteration: usize, mismatch: f64, objective: f64) {
        self.trace.push(TraceRow { iteration, mismatch, objective });
    }
}

fn opt(x: Option<f64>, prec: usize) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"))
}

fn render_table(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}", r.title);
    if let Some(s) = &r.status {
        let _ = writeln!(out, "status: {s}");
    }
    if let Some(o) = r.objective {
        let _ = writeln!(out, "objective: {o:.6e}");
    }
    if !r.voltages.is_empty() {
        let _ = writeln!(out, "\n{:<10} {:>5} {:>10} {:>10}", "node", "phase", "vm_pu", "va_deg");
        for v in &r.voltages {
            let _ = writeln!(out, "{:<10} {:>5} {:>10.4} {:>10.4}", v.node, v.phase, v.vm_pu, v.va_deg);
        }
    }
    if !r.head_flows.is_empty() {
        let _ = writeln!(out, "\n{:<10} {:>5} {:>12} {:>12}", "segment", "phase", "p_kw", "q_kvar");
        for f in &r.head_flows {
            let _ = writeln!(out, "{:<10} {:>5} {:>12.4} {:>12.4}", f.segment, f.phase, f.p_kw, f.q_kvar);
        }
    }
    if !r.dispatch.is_empty() {
        let _ = writeln!(out, "\n{:<10} {:>5} {:>12} {:>12}", "generator", "phase", "p_kw", "q_kvar");
        for d in &r.dispatch {
            let _ = writeln!(out, "{:<10} {:>5} {:>12.4} {:>12.4}", d.generator, d.phase, d.p_kw, d.q_kvar);
        }
    }
    if !r.errors.is_empty() {
        let _ = writeln!(
            out,
            "\n{:<12} {:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "case", "segment", "P_a %", "P_b %", "P_c %", "Q_a %", "Q_b %", "Q_c %"
        );
        for e in &r.errors {
            let _ = write!(out, "{:<12} {:<10}", e.case, e.segment);
            for x in e.p_pct.iter().chain(&e.q_pct) {
                let _ = write!(out, " {:>9}", opt(*x, 4));
            }
            out.push('\n');
        }
    }
    if !r.rank1_gaps.is_empty() {
        let worst = r.rank1_gaps.iter().map(|g| g.gap).fold(0.0, f64::max);
        let _ = writeln!(out, "\nmax rank-1 gap: {worst:.3e}");
    }
    if !r.trace.is_empty() {
        let _ = writeln!(out, "\n{:>4} {:>12} {:>14}", "iter", "mismatch", "objective");
        for t in &r.trace {
            let _ = writeln!(out, "{:>4} {:>12.3e} {:>14.6e}", t.iteration, t.mismatch, t.objective);
        }
    }
    out
}

fn render_csv(r: &Report) -> String {
    let mut out = String::from("node,phase,vm_pu,va_deg\n");
    for v in &r.voltages {
        let _ = writeln!(out, "{},{},{:.4},{:.4}", v.node, v.phase, v.vm_pu, v.va_deg);
    }
    out
}

/// Renders one or more reports. CSV carries only the voltage profiles;
/// several reports in JSON form an array.
pub fn write_report(reports: &[Report], format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => reports.iter().map(render_table).collect::<Vec<_>>().join("\n"),
        ReportFormat::Csv => reports.iter().map(render_csv).collect::<Vec<_>>().join("\n"),
        ReportFormat::Json => {
            let text = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0])
            } else {
                serde_json::to_string_pretty(reports)
            };
            // Serializing plain data cannot fail.
            text.expect("report serialization") + "\n"
        }
    }
}
