//! SDP assembly checked against the sweep power flow: a converged oracle
//! point must satisfy every equality, and loss-minimizing relaxations must
//! come back rank one at the oracle voltages.

use seqopf::analysis::run_opf;
use seqopf::conic::SolverSettings;
use seqopf::io::load_feeder;
use seqopf::pf::{bus_load_draw, solve_power_flow, zero_injections, PowerFlowOptions};
use seqopf::sdp::{build_sdp, BuildOptions, Formulation, ObjectiveSpec};
use seqopf::FeederModel;

const FEEDERS: [&str; 4] = ["twobus", "fourbus", "ieee13", "ieee34"];

fn oracle_opts(model: &FeederModel) -> (seqopf::pf::PowerFlowSolution, BuildOptions) {
    let sol = solve_power_flow(model, &zero_injections(model), &PowerFlowOptions::default()).unwrap();
    let loads = bus_load_draw(model, &sol.voltages).unwrap().0;
    (sol, BuildOptions { loads: Some(loads), ..BuildOptions::default() })
}

#[test]
fn oracle_point_satisfies_every_equality() {
    for name in FEEDERS {
        let model = load_feeder(name).unwrap();
        let (sol, opts) = oracle_opts(&model);
        for f in [Formulation::Bfm, Formulation::Symmetrical] {
            let sdp = build_sdp(&model, f, &ObjectiveSpec::loss_min(), &opts).unwrap();
            let x = sdp.point_from_power_flow(&sol, &[]).unwrap();
            let (label, r) = sdp.problem.max_equality_residual(&x);
            assert!(r <= 1e-7, "{name} {f:?}: residual {r:.3e} at `{label}`");
        }
    }
}

#[test]
fn symmetrical_loss_min_is_rank_one_and_matches_oracle() {
    for name in ["fourbus", "ieee13", "ieee34"] {
        let model = load_feeder(name).unwrap();
        let (sol, opts) = oracle_opts(&model);
        let opf = run_opf(&model, Formulation::Symmetrical, &ObjectiveSpec::loss_min(), &opts, &SolverSettings::default())
            .unwrap()
            .unwrap_or_else(|s| panic!("{name}: {}", s.tag));
        let gap = opf.max_rank1_gap();
        let mut worst: f64 = 0.0;
        for (a, b) in opf.magnitudes().iter().zip(sol.magnitudes()) {
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
        eprintln!("{name}: status {} gap {gap:.2e} |V| err {worst:.2e}", opf.status.tag);
        assert!(gap <= 1e-5, "{name}: gap {gap:.3e}");
        assert!(worst <= 1e-3, "{name}: |V| error {worst:.3e}");
    }
}
