//! Python module `seqopf`.
//!
//! Runs go through the same configuration as the command line; reports come
//! back as plain dicts and lists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use seqopf::cli::{self, ConfigFile, FormatArg, FormulationArg, ObjectiveArg, RunCommand, RunConfig};
use seqopf::io;
use seqopf::linalg::CMat;
use seqopf::symcomp::{phase_to_sequence, sequence_to_phase, PhaseFrame, SequenceFrame};

create_exception!(seqopf, SeqopfError, PyException);

fn err(e: seqopf::Error) -> PyErr {
    SeqopfError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn parse_enum<T: clap::ValueEnum>(what: &str, s: Option<&str>) -> PyResult<Option<T>> {
    s.map(|s| T::from_str(s, true).map_err(|_| SeqopfError::new_err(format!("unknown {what} `{s}`"))))
        .transpose()
}

#[allow(clippy::too_many_arguments)]
fn run_config(
    command: RunCommand,
    feeder: Option<String>,
    scenario: Option<String>,
    objective: Option<&str>,
    formulation: Option<&str>,
    source_v: Option<f64>,
    taps: Option<BTreeMap<String, Vec<i32>>>,
    dg: Option<PathBuf>,
    head: Option<String>,
    config: Option<PathBuf>,
) -> PyResult<RunConfig> {
    let file = match &config {
        Some(p) => ConfigFile::load(p).map_err(err)?,
        None => ConfigFile::default(),
    };
    let default_objective =
        if command == RunCommand::Voltreg { ObjectiveArg::SupplyCost } else { file.run.objective };
    Ok(RunConfig {
        command,
        feeder,
        scenario,
        objective: parse_enum("objective", objective)?.unwrap_or(default_objective),
        formulation: parse_enum::<FormulationArg>("formulation", formulation)?.unwrap_or(file.run.formulation),
        solver: file.solver,
        load_loop: file.load_loop,
        voltreg: file.voltreg,
        format: FormatArg::Json,
        out: None,
        source_v,
        taps: taps.unwrap_or_default(),
        dg,
        head,
    })
}

/// Runs `pf`, `opf`, `voltreg` or `compare` and returns
/// `(exit_code, reports)`, where the exit code follows the command line
/// convention (0 ok, 2 inaccurate or unconverged, 3 failure).
#[pyfunction]
#[pyo3(signature = (
    command, *, feeder=None, scenario=None, objective=None, formulation=None,
    source_v=None, taps=None, dg=None, head=None, config=None
))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    feeder: Option<String>,
    scenario: Option<String>,
    objective: Option<&str>,
    formulation: Option<&str>,
    source_v: Option<f64>,
    taps: Option<BTreeMap<String, Vec<i32>>>,
    dg: Option<PathBuf>,
    head: Option<String>,
    config: Option<PathBuf>,
) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let command = match command {
        "pf" => RunCommand::Pf,
        "opf" => RunCommand::Opf,
        "voltreg" => RunCommand::Voltreg,
        "compare" => RunCommand::Compare,
        other => return Err(SeqopfError::new_err(format!("unknown command `{other}`"))),
    };
    let cfg = run_config(command, feeder, scenario, objective, formulation, source_v, taps, dg, head, config)?;
    let outcome = py.detach(|| cli::run(&cfg)).map_err(err)?;
    let value = serde_json::to_value(&outcome.reports).map_err(|e| SeqopfError::new_err(e.to_string()))?;
    Ok((outcome.exit_code, json_to_py(py, &value)?))
}

/// Names of the built-in feeders.
#[pyfunction]
fn feeders() -> Vec<&'static str> {
    io::builtin_feeders().collect()
}

/// Names of the built-in scenarios.
#[pyfunction]
fn scenarios() -> Vec<&'static str> {
    io::builtin_scenarios().collect()
}

/// Parses and validates a feeder document; returns element counts.
#[pyfunction]
fn check_feeder<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let m = io::parse_feeder(text).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("name", &m.name)?;
    d.set_item("buses", m.buses.len())?;
    d.set_item("lines", m.lines.len())?;
    d.set_item("regulators", m.regulators.len())?;
    d.set_item("loads", m.loads.len())?;
    d.set_item("generators", m.generators.len())?;
    Ok(d)
}

fn to_cmat(rows: Vec<Vec<Complex64>>) -> PyResult<CMat> {
    if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
        return Err(SeqopfError::new_err("expected a 3x3 matrix"));
    }
    Ok(CMat::from_fn(3, 3, |r, c| rows[r][c]))
}

fn from_cmat(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

/// Phase-frame 3x3 matrix to the sequence frame.
#[pyfunction]
fn to_sequence(m: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
    let frame = PhaseFrame::new(to_cmat(m)?).map_err(err)?;
    Ok(from_cmat(phase_to_sequence(&frame).matrix()))
}

/// Sequence-frame 3x3 matrix back to the phase frame.
#[pyfunction]
fn to_phase(m: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
    let frame = SequenceFrame::new(to_cmat(m)?).map_err(err)?;
    Ok(from_cmat(sequence_to_phase(&frame).matrix()))
}

#[pymodule]
#[pyo3(name = "seqopf")]
fn seqopf_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SeqopfError", m.py().get_type::<SeqopfError>())?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(feeders, m)?)?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(check_feeder, m)?)?;
    m.add_function(wrap_pyfunction!(to_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(to_phase, m)?)?;
    Ok(())
}
