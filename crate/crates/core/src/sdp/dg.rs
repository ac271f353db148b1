use num_complex::Complex64;

use super::expr::LinExpr;
use super::problem::{ConicProblem, VarHandle};
use crate::error::{Error, Result};
use crate::network::DistributedGenerator;

/// Decision variables of one generator: real power per phase; reactive
/// power follows at the fixed power factor.
#[derive(Debug, Clone)]
pub struct GenVars {
    pub gen: usize,
    pub bus: usize,
    /// Generator phases located in the bus phase set.
    pub positions: Vec<usize>,
    pub p: Vec<VarHandle>,
    pub q_ratio: f64,
}

impl GenVars {
    /// `P + jQ` per generator phase.
    pub fn injection(&self) -> Vec<LinExpr> {
        self.p.iter().map(|h| h.scalar().scaled(Complex64::new(1.0, self.q_ratio))).collect()
    }

    pub fn total_p(&self) -> LinExpr {
        let mut acc = LinExpr::zero();
        for h in &self.p {
            acc += &h.scalar();
        }
        acc.compacted()
    }
}

/// Allocates a generator's dispatch and emits its box and balance rows.
///
/// Three-phase units with a balance factor β keep every phase within
/// `(1 ± β)` of the three-phase mean. Single-phase units get only the box.
pub fn dg_constraints(
    problem: &mut ConicProblem,
    index: usize,
    gen: &DistributedGenerator,
    bus: usize,
    positions: Vec<usize>,
) -> Result<GenVars> {
    let n = gen.phases.len();
    if gen.p_min.len() != n || gen.p_max.len() != n {
        return Err(Error::Dimension(format!("generator `{}` limits per phase", gen.id)));
    }
    let p: Vec<VarHandle> = gen
        .phases
        .iter()
        .map(|ph| problem.real_var(format!("P:{}:{}", gen.id, ph.letter())))
        .collect();
    for (k, ph) in gen.phases.iter().enumerate() {
        let label = format!("dg {} {}", gen.id, ph.letter());
        problem.add_range(&label, &p[k].scalar(), gen.p_min[k], gen.p_max[k]);
    }
    let vars = GenVars { gen: index, bus, positions, p, q_ratio: gen.q_ratio() };
    if let Some(beta) = gen.balance_beta {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidModel(format!(
                "generator `{}` balance factor must lie in (0, 1)",
                gen.id
            )));
        }
        if n == 3 {
            let mean = vars.total_p().scaled_real(1.0 / 3.0);
            for (k, ph) in gen.phases.iter().enumerate() {
                let pk = vars.p[k].scalar();
                problem.add_ge(
                    format!("dg {} balance {} lo", gen.id, ph.letter()),
                    &pk - &mean.scaled_real(1.0 - beta),
                );
                problem.add_ge(
                    format!("dg {} balance {} hi", gen.id, ph.letter()),
                    &mean.scaled_real(1.0 + beta) - &pk,
                );
            }
        }
    }
    Ok(vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DgCost, PhaseSet};

    fn gen(phases: PhaseSet, beta: Option<f64>) -> DistributedGenerator {
        let n = phases.len();
        DistributedGenerator {
            id: "g".into(),
            bus: "b".into(),
            phases,
            p_min: vec![0.0; n],
            p_max: vec![100.0; n],
            power_factor: 0.9,
            cost: DgCost::Quadratic { a1: 0.1, a2: 0.0 },
            balance_beta: beta,
        }
    }

    #[test]
    fn balance_band_matches_substitution() {
        let mut p = ConicProblem::new();
        let g = dg_constraints(&mut p, 0, &gen(PhaseSet::ABC, Some(0.1856)), 0, vec![0, 1, 2]).unwrap();
        // Mean 40: phase a at each band edge and just outside.
        let check = |pa: f64| {
            let mut x = vec![0.0; p.n_vars];
            let rest = (120.0 - pa) / 2.0;
            x[g.p[0].offset] = pa;
            x[g.p[1].offset] = rest;
            x[g.p[2].offset] = rest;
            p.max_inequality_violation(&x)
        };
        assert!(check(32.576) < 1e-12);
        assert!(check(47.424) < 1e-12);
        assert!(check(32.4) > 1e-3);
        assert!(check(47.6) > 1e-3);
        assert_eq!(p.ineq.len(), 6 + 6);
    }

    #[test]
    fn single_phase_has_no_band() {
        let mut p = ConicProblem::new();
        dg_constraints(&mut p, 0, &gen(PhaseSet::single(crate::network::Phase::B), Some(0.2)), 0, vec![0])
            .unwrap();
        assert_eq!(p.ineq.len(), 2);
    }

    #[test]
    fn reactive_power_at_fixed_power_factor() {
        let mut p = ConicProblem::new();
        let g = dg_constraints(&mut p, 0, &gen(PhaseSet::ABC, None), 0, vec![0, 1, 2]).unwrap();
        let mut x = vec![0.0; p.n_vars];
        x[g.p[0].offset] = 60.0;
        let s = g.injection()[0].eval(&x);
        assert!((s.im - 29.06).abs() < 5e-3, "{}", s.im);
    }
}
