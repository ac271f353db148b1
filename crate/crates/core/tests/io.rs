use seqopf::analysis::{flow_error, run_opf};
use seqopf::conic::SolverSettings;
use seqopf::io::{builtin_feeders, load_feeder, load_scenario, parse_feeder, parse_scenario, write_report, Report, ReportFormat};
use seqopf::pf::{solve_power_flow, zero_injections, PowerFlowOptions};
use seqopf::sdp::{BuildOptions, Formulation, ObjectiveSpec};
use seqopf::Error;

const TWO_BUS: &str = r#"schema_version = 1

[meta]
name = "t"
s_base_kva = 1000.0
vmin = 0.8
vmax = 1.2
v_base_kv = { main = 4.16 }

[source]
bus = "s"
v_pu = [1.0]

[[buses]]
id = "s"
phases = "abc"

[[buses]]
id = "1"
phases = "abc"

[[lines]]
id = "s1"
from = "s"
to = "1"
phases = "abc"
z_ohm = [
  [[0.1313, 0.3855], [0.0591, 0.1900], [0.0598, 0.1604]],
  [[0.0591, 0.1900], [0.1278, 0.3969], [0.0581, 0.1458]],
  [[0.0598, 0.1604], [0.0581, 0.1458], [0.1293, 0.3919]],
]
"#;

fn parse_err(text: &str) -> (String, String) {
    match parse_feeder(text) {
        Err(Error::Parse { path, message }) => (path, message),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn minimal_document_parses() {
    let m = parse_feeder(TWO_BUS).unwrap();
    assert_eq!(m.lines.len(), 1);
    assert_eq!(m.source.bus, "s");
    assert_eq!(m.source.v_ref.len(), 3);
}

#[test]
fn tap_out_of_range_names_the_regulator() {
    let text = TWO_BUS.replace(
        "[[lines]]",
        "[[buses]]\nid = \"2\"\nphases = \"abc\"\n\n[[regulators]]\nid = \"reg1\"\nfrom = \"1\"\nto = \"2\"\nphases = \"abc\"\ntaps = [17, 0, 0]\n\n[[lines]]",
    );
    let (path, message) = parse_err(&text);
    assert!(path.contains("regulators[0] (reg1)"), "{path}");
    assert!(message.contains("reg1") && message.contains("17"), "{message}");
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let text = TWO_BUS.replace("s_base_kva = 1000.0", "s_base_kva = = 1000.0");
    let (path, _) = parse_err(&text);
    assert!(path.starts_with("<feeder>:5:"), "{path}");
}

#[test]
fn unknown_bus_is_located() {
    let text = TWO_BUS.replace("to = \"1\"", "to = \"9\"");
    let (path, message) = parse_err(&text);
    assert!(path.contains("s1"), "{path}");
    assert!(message.contains('9'), "{message}");
}

#[test]
fn unknown_field_is_rejected() {
    let text = TWO_BUS.replace("vmin = 0.8", "vmin = 0.8\nbogus = 1");
    let (path, message) = parse_err(&text);
    assert!(path.starts_with("<feeder>:"), "{path}");
    assert!(message.contains("bogus"), "{message}");
}

#[test]
fn duplicate_ids_are_rejected() {
    let text = TWO_BUS.replace("id = \"1\"\nphases", "id = \"s\"\nphases");
    assert!(parse_feeder(&text).is_err());
}

#[test]
fn scenario_errors_are_located() {
    let sc = parse_scenario("name = \"x\"\nfeeder = \"ieee13\"\n[taps]\nreg1 = [1, 2]\n").unwrap();
    let base = load_feeder("ieee13").unwrap();
    match sc.apply(&base) {
        Err(Error::Parse { path, .. }) => assert_eq!(path, "taps.reg1"),
        other => panic!("{other:?}"),
    }
    assert!(load_scenario("/nonexistent/scenario.toml").is_err());
}

#[test]
fn every_builtin_feeder_is_listed_and_loads() {
    for name in builtin_feeders() {
        load_feeder(name).unwrap();
    }
}

#[test]
fn voltage_table_has_one_row_per_bus_phase() {
    let model = load_feeder("ieee13").unwrap();
    let pf = solve_power_flow(&model, &zero_injections(&model), &PowerFlowOptions::default()).unwrap();
    let report = Report::from_power_flow("pf", &model, &pf, Some("650632"));
    let expected: usize = model.buses.iter().map(|b| b.phases.len()).sum();
    assert_eq!(report.voltages.len(), expected);
    let csv = write_report(std::slice::from_ref(&report), ReportFormat::Csv);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("node,phase,vm_pu,va_deg"));
    assert_eq!(lines.count(), expected);
    assert_eq!(report.head_flows.len(), 3);
}

#[test]
fn error_table_has_six_columns_and_output_is_deterministic() {
    let run = load_scenario("case2").unwrap();
    let model = &run.model;
    let render = || {
        let sol = run_opf(
            model,
            Formulation::Symmetrical,
            &ObjectiveSpec::loss_min(),
            &BuildOptions::default(),
            &SolverSettings::default(),
        )
        .unwrap()
        .unwrap();
        let pf = solve_power_flow(model, &zero_injections(model), &PowerFlowOptions::default()).unwrap();
        let mut r = Report::from_opf("opf", model, &sol, Some("650632"));
        r.push_error("case2", &flow_error(&sol, &pf, "650632").unwrap());
        r
    };
    let r = render();
    assert_eq!(r.errors.len(), 1);
    let cells: Vec<_> = r.errors[0].p_pct.iter().chain(&r.errors[0].q_pct).collect();
    assert_eq!(cells.len(), 6);
    assert!(cells.iter().all(|c| c.is_some()));
    let table = write_report(std::slice::from_ref(&r), ReportFormat::Table);
    let header = table.lines().find(|l| l.starts_with("case")).unwrap();
    assert_eq!(header.split_whitespace().filter(|w| *w == "%").count(), 6);

    for format in [ReportFormat::Table, ReportFormat::Csv, ReportFormat::Json] {
        let a = write_report(std::slice::from_ref(&r), format);
        let b = write_report(&[render()], format);
        assert_eq!(a, b, "{format:?}");
    }
    let json: serde_json::Value = serde_json::from_str(&write_report(&[r], ReportFormat::Json)).unwrap();
    assert_eq!(json["errors"][0]["p_pct"].as_array().unwrap().len(), 3);
}

#[test]
fn report_values_have_four_decimals() {
    let model = load_feeder("twobus").unwrap();
    let pf = solve_power_flow(&model, &zero_injections(&model), &PowerFlowOptions::default()).unwrap();
    let r = Report::from_power_flow("pf", &model, &pf, None);
    for v in &r.voltages {
        assert_eq!((v.vm_pu * 1e4).round() / 1e4, v.vm_pu);
        assert!(v.va_deg != 0.0 || v.va_deg.is_sign_positive());
    }
}
