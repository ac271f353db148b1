use std::process::{Command, Output};

fn seqopf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqopf")).args(args).env_remove("SEQOPF_CONFIG").output().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

#[test]
fn power_flow_succeeds() {
    let out = seqopf(&["pf", "--feeder", "ieee13", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("675,a,")), "{text}");
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(seqopf(&["--help"]).status.code(), Some(0));
    assert_eq!(seqopf(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_three_with_json() {
    let out = seqopf(&["opf", "--feeder", "ieee13", "--bogus"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
}

#[test]
fn unknown_feeder_is_a_parse_error() {
    let out = seqopf(&["pf", "--feeder", "nope"]);
    assert_eq!(out.status.code(), Some(3));
    let j = stderr_json(&out);
    assert_eq!(j["error"]["kind"], "parse");
    assert_eq!(j["exit_code"], 3);
}

#[test]
fn bad_tap_override_is_located() {
    let out = seqopf(&["pf", "--feeder", "ieee13", "--tap", "reg1=17,0,0"]);
    assert_eq!(out.status.code(), Some(3));
    let msg = stderr_json(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("reg1") && msg.contains("17"), "{msg}");
}

#[test]
fn config_errors_report_the_line() {
    let dir = std::env::temp_dir().join(format!("seqopf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "[run]\nformat = \"csv\"\n\n[solver]\nnope = 1\n").unwrap();
    let out = seqopf(&["pf", "--feeder", "twobus", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let msg = stderr_json(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("bad.toml:5"), "{msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn opf_json_report_and_out_file() {
    let dir = std::env::temp_dir().join(format!("seqopf-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("r.json");
    let out = seqopf(&["opf", "--feeder", "fourbus", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{out:?}");
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(!v["voltages"].as_array().unwrap().is_empty());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn compare_prints_error_table() {
    let out = seqopf(&["compare", "--scenario", "case1", "--format", "json"]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{out:?}");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    let errors = reports[2]["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 2);
    assert_eq!(errors[0]["case"], "symmetrical");
}
