use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use proptest::prelude::*;

use seqopf::analysis::rank1_gap;
use seqopf::conic::hermitian_embedding;
use seqopf::io::load_feeder;
use seqopf::linalg::{frobenius, to_cvec, CMat};
use seqopf::network::radial_order;
use seqopf::pf::{solve_power_flow, zero_injections, PowerFlowOptions};
use seqopf::symcomp::{impedance_to_sequence, phase_to_sequence, sequence_to_phase, PhaseFrame};
use seqopf::voltreg::{dg_outer_product_approx, voltage_sensitivity};
use seqopf::PhaseSet;

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn hermitian(n: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec(complex(), n * n).prop_map(move |v| {
        let m = CMat::from_vec(n, n, v);
        (&m + m.adjoint()).scale(0.5)
    })
}

fn vector(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(complex(), n)
}

proptest! {
    #[test]
    fn sequence_round_trip(m in hermitian(3)) {
        let back = sequence_to_phase(&phase_to_sequence(&PhaseFrame::new(m.clone()).unwrap()));
        prop_assert!(frobenius(&(back.matrix() - &m)) <= 1e-12 * frobenius(&m).max(1.0));
    }

    #[test]
    fn sequence_transform_preserves_spectrum(m in hermitian(3)) {
        let seq = phase_to_sequence(&PhaseFrame::new(m.clone()).unwrap()).into_matrix();
        let mut a: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        let mut b: Vec<f64> = SymmetricEigen::new(seq).eigenvalues.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn circulant_impedance_diagonalizes(zs in complex(), zm in complex()) {
        let z = CMat::from_fn(3, 3, |r, c| if r == c { zs } else { zm });
        let seq = impedance_to_sequence(&z).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    prop_assert!(seq[(r, c)].norm() <= 1e-12 * (zs.norm() + zm.norm()).max(1.0));
                }
            }
        }
    }

    #[test]
    fn embedding_keeps_outer_products_psd(x in vector(4)) {
        let h = &to_cvec(&x) * to_cvec(&x).adjoint();
        let e = hermitian_embedding(&h).unwrap();
        let eig = SymmetricEigen::new(e).eigenvalues;
        let top = eig.iter().copied().fold(0.0, f64::max);
        prop_assert!(eig.iter().all(|&l| l >= -1e-10 * top.max(1.0)));
        // Rank one in the complex frame is rank two in the real one.
        prop_assert!(eig.iter().filter(|&&l| l > 1e-9 * top.max(1.0)).count() <= 2);
    }

    #[test]
    fn outer_products_are_rank_one(x in vector(3), s in 0.01..100.0f64) {
        prop_assume!(x.iter().any(|c| c.norm() > 1e-3));
        let h = (&to_cvec(&x) * to_cvec(&x).adjoint()).scale(s);
        prop_assert!(rank1_gap(&h).unwrap().gap <= 1e-12);
    }

    #[test]
    fn sum_of_distinct_outer_products_is_not_rank_one(a in vector(2), b in vector(2)) {
        let (va, vb) = (to_cvec(&a), to_cvec(&b));
        let det = a[0] * b[1] - a[1] * b[0];
        prop_assume!(det.norm() > 1e-2 * va.norm() * vb.norm() && va.norm() > 1e-2 && vb.norm() > 1e-2);
        let h = &va * va.adjoint() + &vb * vb.adjoint();
        prop_assert!(rank1_gap(&h).unwrap().gap > 1e-9);
    }

    #[test]
    fn balanced_unit_outer_product_is_scaled_rank_one(re in -1.0..1.0f64, im in -1.0..1.0f64) {
        let lambda = Complex64::new(re, im);
        prop_assume!(lambda.norm() > 1e-6);
        let g = dg_outer_product_approx(&[lambda; 3], PhaseSet::ABC).unwrap().unscale(lambda.norm()) * (lambda.conj() / lambda.norm());
        prop_assert!(frobenius(&(&g - g.adjoint())) <= 1e-12);
        prop_assert!((g.trace() - Complex64::new(3.0, 0.0)).norm() <= 1e-12);
        prop_assert!(rank1_gap(&g).unwrap().gap <= 1e-12);
    }

    #[test]
    fn sensitivity_is_linear(a in vector(3), b in vector(3), k in -3.0..3.0f64) {
        let mut model = load_feeder("fourbus").unwrap();
        model.generators.push(seqopf::network::DistributedGenerator {
            id: "g".into(),
            bus: model.buses.last().unwrap().id.clone(),
            phases: PhaseSet::ABC,
            p_min: vec![-1.0; 3],
            p_max: vec![1.0; 3],
            power_factor: 1.0,
            cost: seqopf::network::DgCost::Quadratic { a1: 0.0, a2: 0.0 },
            balance_beta: None,
        });
        let topo = radial_order(&model).unwrap();
        let ids: Vec<String> = model.buses.iter().skip(1).map(|b| b.id.clone()).collect();
        let sens = voltage_sensitivity(&model, &topo, &ids).unwrap();
        let combo: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y * k).collect();
        let (pa, pb, pc) = (sens.predict(&[a]).unwrap(), sens.predict(&[b]).unwrap(), sens.predict(&[combo]).unwrap());
        for ((ra, rb), rc) in pa.iter().zip(&pb).zip(&pc) {
            for ((x, y), z) in ra.iter().zip(rb).zip(rc) {
                prop_assert!((x + k * y - z).abs() <= 1e-9 * (x.abs() + y.abs() + 1.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn power_flow_losses_are_nonnegative(scale in 0.05..1.5f64) {
        let mut model = load_feeder("fourbus").unwrap();
        for l in &mut model.loads {
            l.s_nominal.iter_mut().for_each(|s| *s *= scale);
        }
        let sol = solve_power_flow(&model, &zero_injections(&model), &PowerFlowOptions::default()).unwrap();
        prop_assert!(sol.converged);
        let head: Complex64 = model
            .lines
            .iter()
            .filter(|l| l.from == model.source.bus)
            .flat_map(|l| sol.flows[sol.branch_ids.iter().position(|b| *b == l.id).unwrap()].iter().copied())
            .sum();
        let drawn: Complex64 = sol.load_power.iter().flatten().sum();
        prop_assert!(head.re - drawn.re >= -1e-12);
    }
}
