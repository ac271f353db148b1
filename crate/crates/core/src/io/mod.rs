//! Feeder documents, scenarios and reports.
//!
//! Feeders are TOML files (`.feeder.toml`) with a `schema_version` key.
//! The committed feeders and scenarios are compiled in and addressable by
//! name, so `load_feeder("ieee34")` works from any directory.

pub mod document;
mod report;
mod scenario;

use std::path::{Path, PathBuf};

pub use document::{FeederDocument, GeneratorDoc, SCHEMA_VERSION};
pub use report::{write_report, DispatchRow, ErrorRow, FlowRow, GapRow, Report, ReportFormat, TraceRow, VoltageRow};
pub use scenario::{ReferenceData, Scenario};

use crate::error::{Error, Result};
use crate::network::{to_per_unit, validate_feeder, FeederModel};

const FEEDERS: &[(&str, &str)] = &[
    ("twobus", include_str!("../../data/twobus.feeder.toml")),
    ("fourbus", include_str!("../../data/fourbus.feeder.toml")),
    ("sixbus", include_str!("../../data/sixbus.feeder.toml")),
    ("ieee13", include_str!("../../data/ieee13.feeder.toml")),
    ("ieee34", include_str!("../../data/ieee34.feeder.toml")),
];

const SCENARIOS: &[(&str, &str)] = &[
    ("case1", include_str!("../../data/scenarios/case1.toml")),
    ("case2", include_str!("../../data/scenarios/case2.toml")),
    ("case3", include_str!("../../data/scenarios/case3.toml")),
    ("case4", include_str!("../../data/scenarios/case4.toml")),
    ("sixbus-cost", include_str!("../../data/scenarios/sixbus-cost.toml")),
    ("voltreg13", include_str!("../../data/scenarios/voltreg13.toml")),
    ("voltreg34", include_str!("../../data/scenarios/voltreg34.toml")),
];

pub fn builtin_feeders() -> impl Iterator<Item = &'static str> {
    FEEDERS.iter().map(|(n, _)| *n)
}

pub fn builtin_scenarios() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn builtin_feeder_text(name: &str) -> Option<&'static str> {
    FEEDERS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn builtin_scenario_text(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// `origin:line:col` for a byte offset.
fn position(origin: &str, text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    format!("{origin}:{line}:{col}")
}

fn toml_error(origin: &str, text: &str, e: toml::de::Error) -> Error {
    let path = match e.span() {
        Some(span) => position(origin, text, span.start),
        None => origin.to_string(),
    };
    Error::Parse { path, message: e.message().trim().to_string() }
}

fn prefix(origin: &str, e: Error) -> Error {
    match e {
        Error::Parse { path, message } => Error::Parse { path: format!("{origin}: {path}"), message },
        other => other,
    }
}

pub fn parse_document(text: &str) -> Result<FeederDocument> {
    parse_document_named("<feeder>", text)
}

fn parse_document_named(origin: &str, text: &str) -> Result<FeederDocument> {
    toml::from_str(text).map_err(|e| toml_error(origin, text, e))
}

/// Parses, converts to per-unit and validates a feeder document.
pub fn parse_feeder(text: &str) -> Result<FeederModel> {
    parse_feeder_named("<feeder>", text)
}

fn parse_feeder_named(origin: &str, text: &str) -> Result<FeederModel> {
    let doc = parse_document_named(origin, text)?;
    document_to_model(origin, &doc)
}

pub fn document_to_model(origin: &str, doc: &FeederDocument) -> Result<FeederModel> {
    let model = doc.to_model().map_err(|e| prefix(origin, e))?;
    let model = to_per_unit(&model)?;
    let report = validate_feeder(&model);
    if let Some(issue) = report.issues.first() {
        return Err(Error::Parse { path: format!("{origin}: {}", issue.location), message: issue.message.clone() });
    }
    Ok(model)
}

pub fn serialize_document(doc: &FeederDocument) -> String {
    toml::to_string(doc).expect("feeder documents always serialize")
}

/// A built-in feeder name or a path to a feeder file.
pub fn load_feeder(name_or_path: &str) -> Result<FeederModel> {
    if let Some(text) = builtin_feeder_text(name_or_path) {
        return parse_feeder_named(name_or_path, text);
    }
    let text = std::fs::read_to_string(name_or_path)
        .map_err(|e| Error::Parse { path: name_or_path.to_string(), message: e.to_string() })?;
    parse_feeder_named(name_or_path, &text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    toml::from_str(text).map_err(|e| toml_error("<scenario>", text, e))
}

/// A loaded scenario with its feeder already overridden.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub base: FeederModel,
    pub model: FeederModel,
}

fn resolve_feeder(feeder: &str, dir: Option<&Path>) -> Result<FeederModel> {
    if builtin_feeder_text(feeder).is_some() {
        return load_feeder(feeder);
    }
    let path: PathBuf = match dir {
        Some(d) => d.join(feeder),
        None => PathBuf::from(feeder),
    };
    load_feeder(&path.to_string_lossy())
}

/// A built-in scenario name or a path to a scenario file.
pub fn load_scenario(name_or_path: &str) -> Result<ScenarioRun> {
    let (scenario, dir) = match builtin_scenario_text(name_or_path) {
        Some(text) => (toml::from_str::<Scenario>(text).map_err(|e| toml_error(name_or_path, text, e))?, None),
        None => {
            let text = std::fs::read_to_string(name_or_path)
                .map_err(|e| Error::Parse { path: name_or_path.to_string(), message: e.to_string() })?;
            let sc = toml::from_str::<Scenario>(&text).map_err(|e| toml_error(name_or_path, &text, e))?;
            (sc, Path::new(name_or_path).parent().map(Path::to_path_buf))
        }
    };
    let base = resolve_feeder(&scenario.feeder, dir.as_deref())?;
    let model = scenario.apply(&base)?;
    Ok(ScenarioRun { scenario, base, model })
}
