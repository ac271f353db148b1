use seqopf::io::{self, load_feeder, load_scenario, parse_document, serialize_document};
use seqopf::network::{validate_feeder, Phase};
use seqopf::pf::{solve_power_flow, zero_injections, PowerFlowOptions};

#[test]
fn every_builtin_feeder_parses_validates_and_solves() {
    for name in io::builtin_feeders() {
        let m = load_feeder(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(validate_feeder(&m).is_empty(), "{name}");
        let sol = solve_power_flow(&m, &zero_injections(&m), &PowerFlowOptions::default())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(sol.converged, "{name}");
    }
}

#[test]
fn every_builtin_scenario_loads_and_solves() {
    for name in io::builtin_scenarios() {
        let run = load_scenario(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        let m = &run.model;
        solve_power_flow(m, &zero_injections(m), &PowerFlowOptions::default())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn document_round_trip_is_lossless() {
    for name in io::builtin_feeders() {
        let doc = parse_document(io::builtin_feeder_text(name).unwrap()).unwrap();
        let again = parse_document(&serialize_document(&doc)).unwrap();
        assert_eq!(doc, again, "{name}");
    }
}

#[test]
fn ieee34_case4_profile_near_reference() {
    let run = load_scenario("case4").unwrap();
    let m = &run.model;
    let sol = solve_power_flow(m, &zero_injections(m), &PowerFlowOptions::default()).unwrap();
    let reference = run.scenario.reference.as_ref().unwrap();
    let mut worst: f64 = 0.0;
    for (bus, v) in &reference.voltages_pu {
        let pos = m.bus(bus).unwrap().phases.position(Phase::A).unwrap();
        let got = sol.voltage(bus).unwrap()[pos].norm();
        eprintln!("{bus:>5} {got:.4} {:.4}", v[0]);
        worst = worst.max((got - v[0]).abs());
    }
    eprintln!("worst {worst:.4}");
    assert!(worst < 0.01);
}
