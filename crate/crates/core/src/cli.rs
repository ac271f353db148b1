//! Command-line front end.
//!
//! Exit codes: 0 when every solve is `Solved` and every loop converged, 2
//! when a result was produced but is inaccurate or unconverged, 3 on
//! failure. Failures also print a JSON object on stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{flow_error, OpfSolution};
use crate::conic::{SolverSettings, StatusTag};
use crate::error::{Error, Result};
use crate::io::{load_feeder, load_scenario, parse_scenario, write_report, GeneratorDoc, Report, ReportFormat, Scenario};
use crate::iteration::{run_opf_with_load_update, LoopOptions};
use crate::network::FeederModel;
use crate::pf::{injections_from_dispatch, solve_power_flow, zero_injections, PowerFlowOptions};
use crate::sdp::{BuildOptions, Formulation, ObjectiveSpec};
use crate::voltreg::{run_voltage_regulation, VoltRegOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INACCURATE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    LossMin,
    CostMin,
    SupplyCost,
}

impl ObjectiveArg {
    pub fn spec(self) -> ObjectiveSpec {
        match self {
            ObjectiveArg::LossMin => ObjectiveSpec::loss_min(),
            ObjectiveArg::CostMin => ObjectiveSpec::cost_min(),
            ObjectiveArg::SupplyCost => ObjectiveSpec::supply_cost(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationArg {
    Bfm,
    Symmetrical,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::Bfm => Formulation::Bfm,
            FormulationArg::Symmetrical => Formulation::Symmetrical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Table,
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "seqopf", version, about = "Semidefinite OPF for unbalanced radial distribution feeders")]
pub struct Cli {
    /// Defaults file (TOML with [run], [solver], [loop], [voltreg]).
    #[arg(long, global = true, env = "SEQOPF_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power flow at zero generator output.
    Pf(CaseArgs),
    /// Relaxed OPF with the voltage-dependent load update.
    Opf(OpfArgs),
    /// Voltage regulation with distributed units.
    Voltreg(OpfArgs),
    /// Both formulations against the power flow at their dispatch.
    Compare(OpfArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CaseArgs {
    /// Built-in feeder name or feeder file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub feeder: Option<String>,
    /// Built-in scenario name or scenario file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Source voltage magnitude override (p.u.).
    #[arg(long)]
    pub source_v: Option<f64>,
    /// Tap override, e.g. `reg1=10,8,11`. Repeatable.
    #[arg(long = "tap", value_name = "ID=T1,T2,T3")]
    pub taps: Vec<String>,
    /// Extra generators: a file with `[[generators]]` tables (kW per phase).
    #[arg(long)]
    pub dg: Option<PathBuf>,
    /// Segment whose sending-end flow is reported.
    #[arg(long)]
    pub head: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OpfArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    pub formulation: Option<FormulationArg>,
}

/// Defaults read from the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub run: RunDefaults,
    pub solver: SolverSettings,
    #[serde(rename = "loop")]
    pub load_loop: LoopOptions,
    pub voltreg: VoltRegOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunDefaults {
    pub objective: ObjectiveArg,
    pub formulation: FormulationArg,
    pub format: FormatArg,
}

impl Default for RunDefaults {
    fn default() -> Self {
        RunDefaults {
            objective: ObjectiveArg::LossMin,
            formulation: FormulationArg::Symmetrical,
            format: FormatArg::Table,
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })?;
        toml::from_str(&text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!(":{line}")
                })
                .unwrap_or_default();
            Error::Parse { path: format!("{}{at}", path.display()), message: e.message().to_string() }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunCommand {
    Pf,
    Opf,
    Voltreg,
    Compare,
}

/// Everything one run needs, after merging flags over config defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: RunCommand,
    pub feeder: Option<String>,
    pub scenario: Option<String>,
    pub objective: ObjectiveArg,
    pub formulation: FormulationArg,
    pub solver: SolverSettings,
    pub load_loop: LoopOptions,
    pub voltreg: VoltRegOptions,
    pub format: FormatArg,
    pub out: Option<PathBuf>,
    pub source_v: Option<f64>,
    pub taps: BTreeMap<String, Vec<i32>>,
    pub dg: Option<PathBuf>,
    pub head: Option<String>,
}

fn parse_tap(spec: &str) -> Result<(String, Vec<i32>)> {
    let bad = |m: &str| Error::Parse { path: format!("--tap {spec}"), message: m.to_string() };
    let (id, taps) = spec.split_once('=').ok_or_else(|| bad("expected ID=T1,T2,..."))?;
    let taps = taps
        .split(',')
        .map(|t| i32::from_str(t.trim()).map_err(|_| bad(&format!("`{t}` is not an integer tap"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((id.trim().to_string(), taps))
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<RunConfig> {
        let file = match &cli.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let (command, args, objective, formulation) = match &cli.command {
            Command::Pf(c) => (RunCommand::Pf, c, None, None),
            Command::Opf(o) => (RunCommand::Opf, &o.case, o.objective, o.formulation),
            Command::Voltreg(o) => (
                RunCommand::Voltreg,
                &o.case,
                Some(o.objective.unwrap_or(ObjectiveArg::SupplyCost)),
                o.formulation,
            ),
            Command::Compare(o) => (RunCommand::Compare, &o.case, o.objective, o.formulation),
        };
        let mut taps = BTreeMap::new();
        for t in &args.taps {
            let (id, v) = parse_tap(t)?;
            taps.insert(id, v);
        }
        Ok(RunConfig {
            command,
            feeder: args.feeder.clone(),
            scenario: args.scenario.clone(),
            objective: objective.unwrap_or(file.run.objective),
            formulation: formulation.unwrap_or(file.run.formulation),
            solver: file.solver,
            load_loop: file.load_loop,
            voltreg: file.voltreg,
            format: args.format.unwrap_or(file.run.format),
            out: args.out.clone(),
            source_v: args.source_v,
            taps,
            dg: args.dg.clone(),
            head: args.head.clone(),
        })
    }
}

/// Reports plus the exit code they warrant.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<Report>,
    pub exit_code: i32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DgOverlay {
    generators: Vec<GeneratorDoc>,
}

struct Case {
    name: String,
    model: FeederModel,
    exempt: Vec<String>,
    head: Option<String>,
}

fn load_case(cfg: &RunConfig) -> Result<Case> {
    let (name, base, mut exempt, mut head) = match (&cfg.scenario, &cfg.feeder) {
        (Some(s), _) => {
            let run = load_scenario(s)?;
            (run.scenario.name.clone(), run.model, run.scenario.exempt, run.scenario.head_segment)
        }
        (None, Some(f)) => (f.clone(), load_feeder(f)?, Vec::new(), None),
        (None, None) => return Err(Error::Config("either --feeder or --scenario is required".into())),
    };
    let mut overlay = parse_scenario(&format!("name = {name:?}\nfeeder = \"\""))?;
    overlay.source_v_pu = cfg.source_v;
    overlay.taps = cfg.taps.clone();
    if let Some(path) = &cfg.dg {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })?;
        let dg: DgOverlay = toml::from_str(&text)
            .map_err(|e| Error::Parse { path: path.display().to_string(), message: e.message().to_string() })?;
        overlay.generators = dg.generators;
    }
    if cfg.head.is_some() {
        head = cfg.head.clone();
    }
    overlay.head_segment = head.clone();
    let model = Scenario::apply(&overlay, &base)?;
    if head.is_none() {
        head = default_head(&model);
    }
    exempt.retain(|b| model.bus(b).is_some());
    Ok(Case { name, model, exempt, head })
}

/// The only branch leaving the source, if there is exactly one.
fn default_head(model: &FeederModel) -> Option<String> {
    let src = &model.source.bus;
    let mut out = model
        .lines
        .iter()
        .filter(|l| &l.from == src)
        .map(|l| l.id.clone())
        .chain(model.regulators.iter().filter(|r| &r.from == src).map(|r| r.id.clone()));
    let first = out.next();
    match out.next() {
        None => first,
        Some(_) => None,
    }
}

fn status_code(tag: StatusTag, converged: bool) -> i32 {
    match tag {
        StatusTag::Solved if converged => EXIT_OK,
        StatusTag::Solved | StatusTag::InaccurateSolved => EXIT_INACCURATE,
        _ => EXIT_FAILURE,
    }
}

fn build_options(case: &Case) -> BuildOptions {
    BuildOptions { exempt: case.exempt.clone(), ..BuildOptions::default() }
}

fn solve_opf(
    case: &Case,
    cfg: &RunConfig,
    formulation: Formulation,
    opts: &LoopOptions,
) -> Result<(std::result::Result<OpfSolution, StatusTag>, crate::iteration::IterationTrace)> {
    let out = run_opf_with_load_update(
        &case.model,
        formulation,
        &cfg.objective.spec(),
        &build_options(case),
        &cfg.solver,
        opts,
    )?;
    Ok((out.result.map_err(|s| s.tag), out.trace))
}

fn failed_report(title: &str, tag: StatusTag) -> Report {
    Report { title: title.to_string(), status: Some(tag.to_string()), ..Report::default() }
}

/// Executes one configured run.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let case = load_case(cfg)?;
    let head = case.head.as_deref();
    match cfg.command {
        RunCommand::Pf => {
            let sol = solve_power_flow(&case.model, &zero_injections(&case.model), &PowerFlowOptions::default())?;
            let report = Report::from_power_flow(&format!("pf {}", case.name), &case.model, &sol, head);
            Ok(RunOutcome { reports: vec![report], exit_code: EXIT_OK })
        }
        RunCommand::Opf => {
            let formulation: Formulation = cfg.formulation.into();
            let title = format!("opf {} {:?}", case.name, formulation).to_lowercase();
            let (res, trace) = solve_opf(&case, cfg, formulation, &cfg.load_loop)?;
            let (mut report, code) = match res {
                Ok(sol) => {
                    let code = status_code(sol.status.tag, trace.converged);
                    (Report::from_opf(&title, &case.model, &sol, head), code)
                }
                Err(tag) => (failed_report(&title, tag), EXIT_FAILURE),
            };
            for s in &trace.steps {
                report.push_trace(s.iteration, s.max_change, s.objective);
            }
            Ok(RunOutcome { reports: vec![report], exit_code: code })
        }
        RunCommand::Voltreg => {
            let sol = run_voltage_regulation(
                &case.model,
                &case.exempt,
                &cfg.objective.spec(),
                &cfg.solver,
                &cfg.voltreg,
            )?;
            let mut report =
                Report::from_power_flow(&format!("voltreg {}", case.name), &case.model, &sol.oracle, head);
            report.push_dispatch(&case.model, &sol.dispatch);
            for s in &sol.steps {
                report.push_trace(s.iteration, s.violation, s.objective);
            }
            let worst = sol
                .steps
                .iter()
                .map(|s| s.status)
                .find(|t| *t != StatusTag::Solved)
                .unwrap_or(StatusTag::Solved);
            let (status, code) = match &sol.failure {
                Some(f) => (f.tag, EXIT_FAILURE),
                None => (worst, status_code(worst, sol.converged)),
            };
            report.status = Some(format!("{status}, {}", if sol.converged { "converged" } else { "not converged" }));
            report.objective = sol.steps.last().map(|s| s.objective);
            Ok(RunOutcome { reports: vec![report], exit_code: code })
        }
        RunCommand::Compare => compare(&case, cfg),
    }
}

/// Symmetrical relaxation with the load update against the phase-frame
/// relaxation at nominal constant-power loads, each replayed through the
/// power flow at its own dispatch.
fn compare(case: &Case, cfg: &RunConfig) -> Result<RunOutcome> {
    let seg = case
        .head
        .clone()
        .ok_or_else(|| Error::Config("compare needs a head segment (--head)".into()))?;
    let baseline = LoopOptions { max_iter: 1, exact_impedance: false, ..cfg.load_loop };
    let runs = [
        ("symmetrical", Formulation::Symmetrical, cfg.load_loop),
        ("bfm", Formulation::Bfm, baseline),
    ];
    let mut reports = Vec::new();
    let mut errors = Report { title: format!("compare {} head errors", case.name), ..Report::default() };
    let mut code = EXIT_OK;
    for (label, formulation, opts) in runs {
        let title = format!("compare {} {label}", case.name);
        let (res, trace) = solve_opf(case, cfg, formulation, &opts)?;
        let sol = match res {
            Ok(s) => s,
            Err(tag) => {
                reports.push(failed_report(&title, tag));
                code = EXIT_FAILURE;
                continue;
            }
        };
        // A single nominal pass is the baseline by design, not a stall.
        let converged = trace.converged || formulation == Formulation::Bfm;
        code = code.max(status_code(sol.status.tag, converged));
        let dispatch: Vec<Vec<Complex64>> =
            sol.dispatch.iter().map(|d| d.iter().map(|&(p, q)| Complex64::new(p, q)).collect()).collect();
        let inj = injections_from_dispatch(&case.model, &dispatch)?;
        let oracle = solve_power_flow(&case.model, &inj, &PowerFlowOptions::default())?;
        errors.push_error(label, &flow_error(&sol, &oracle, &seg)?);
        let mut r = Report::from_opf(&title, &case.model, &sol, Some(&seg));
        for s in &trace.steps {
            r.push_trace(s.iteration, s.max_change, s.objective);
        }
        reports.push(r);
    }
    reports.push(errors);
    Ok(RunOutcome { reports, exit_code: code })
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "parse",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
        Error::InvalidModel(_) | Error::NotRadial(_) | Error::Disconnected(_) | Error::UnknownId { .. } => "model",
        Error::MissingBase(_) | Error::TapOutOfRange { .. } | Error::Dimension(_) | Error::NotHermitian { .. } => {
            "model"
        }
        Error::ZeroVoltage(_) | Error::PowerFlowDiverged { .. } | Error::VoltageCollapse { .. } => "power-flow",
        Error::Objective(_) | Error::Solver(_) => "solver",
    }
}

/// The JSON object printed on stderr for a failed run.
pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message }, "exit_code": EXIT_FAILURE }).to_string()
}

/// Parses arguments, runs, writes the report, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            eprintln!("{}", error_json("usage", e.render().to_string().trim()));
            return EXIT_FAILURE;
        }
    };
    let outcome = RunConfig::from_cli(&cli).and_then(|cfg| {
        let out = run(&cfg)?;
        let text = write_report(&out.reports, cfg.format.into());
        match &cfg.out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(out.exit_code)
    });
    match outcome {
        Ok(code) => {
            if code == EXIT_FAILURE {
                eprintln!("{}", error_json("solver", "no solution"));
            }
            code
        }
        Err(e) => {
            eprintln!("{}", error_json(error_kind(&e), &e.to_string()));
            EXIT_FAILURE
        }
    }
}
