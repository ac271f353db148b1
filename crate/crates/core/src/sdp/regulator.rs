use nalgebra::DMatrix;

use super::expr::MatExpr;
use super::Frame;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::network::{RegulatorBank, TAP_MAX, TAP_MIN};
use crate::symcomp::fortescue_matrix;

/// `v_i − (S z^H + z S^H) + z ℓ z^H`, the lifted voltage drop across a
/// branch. All arguments share one frame.
pub fn kvl_rhs(v_from: &MatExpr, s: &MatExpr, l: &MatExpr, z: &CMat) -> MatExpr {
    let sz = s.mul_right(&z.adjoint());
    let zs = s.adjoint().mul_left(z);
    let zlz = l.congruence(z);
    &(&(v_from - &sz) - &zs) + &zlz
}

/// `ratio · ratioᵀ` after checking every tap against the mechanical range.
pub fn ratio_matrix(reg: &RegulatorBank) -> Result<DMatrix<f64>> {
    if let Some(&tap) = reg.taps.iter().find(|&&t| !(TAP_MIN..=TAP_MAX).contains(&t)) {
        return Err(Error::TapOutOfRange { id: reg.id.clone(), tap });
    }
    if reg.taps.len() != reg.phases.len() {
        return Err(Error::Dimension(format!("regulator `{}` needs one tap per phase", reg.id)));
    }
    Ok(reg.r_matrix())
}

/// Secondary voltage block of a regulator in place of the ordinary KVL row.
///
/// Phase frame: `v_sec = (v_pri − (S z^H + z S^H) + z ℓ z^H) ⊙ R`. Sequence
/// frame: the bracket is mapped to phase frame, scaled, and mapped back.
pub fn regulator_constraint(
    reg: &RegulatorBank,
    frame: Frame,
    v_pri: &MatExpr,
    s: &MatExpr,
    l: &MatExpr,
    z: &CMat,
) -> Result<MatExpr> {
    let r = ratio_matrix(reg)?;
    let inner = kvl_rhs(v_pri, s, l, z);
    Ok(match frame {
        Frame::Phase => inner.hadamard_real(&r),
        Frame::Sequence => {
            if r.nrows() != 3 {
                return Err(Error::Dimension(format!(
                    "regulator `{}` in sequence frame must be three-phase",
                    reg.id
                )));
            }
            let a = fortescue_matrix();
            inner.congruence(&a).hadamard_real(&r).congruence(&a.adjoint())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, Hermitian};
    use crate::network::PhaseSet;

    fn reg(taps: Vec<i32>) -> RegulatorBank {
        RegulatorBank {
            id: "r".into(),
            from: "a".into(),
            to: "b".into(),
            phases: PhaseSet::ABC,
            taps,
            z: CMat::zeros(3, 3),
        }
    }

    #[test]
    fn full_boost_ratio() {
        let r = ratio_matrix(&reg(vec![16, 16, 16])).unwrap();
        assert!(r.iter().all(|&x| (x - 1.21).abs() < 1e-12));
    }

    #[test]
    fn scenario_taps() {
        let rg = reg(vec![10, 10, 11]);
        let ratio = rg.ratio();
        assert!((ratio[0] - 1.0625).abs() < 1e-15);
        assert!((ratio[2] - 1.06875).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_tap() {
        let err = ratio_matrix(&reg(vec![0, 17, 0])).unwrap_err();
        assert!(matches!(err, Error::TapOutOfRange { tap: 17, .. }));
    }

    #[test]
    fn neutral_taps_pass_voltage_through() {
        let v = Hermitian::outer(&crate::linalg::to_cvec(&[c(1.0, 0.0), c(-0.5, -0.8), c(-0.5, 0.8)]));
        let ve = MatExpr::constant(v.matrix());
        let zero = MatExpr::zeros(3, 3);
        for frame in [Frame::Phase, Frame::Sequence] {
            let out = regulator_constraint(&reg(vec![0, 0, 0]), frame, &ve, &zero, &zero, &CMat::zeros(3, 3))
                .unwrap();
            assert!((out.eval(&[]) - v.matrix()).norm() < 1e-14);
        }
    }

    #[test]
    fn sequence_form_matches_phase_form() {
        let a = fortescue_matrix();
        let v = CMat::from_fn(3, 3, |i, j| if i == j { c(1.0 + i as f64 * 0.1, 0.0) } else { c(0.2, 0.1 * (j as f64 - i as f64)) });
        let v = Hermitian::new(v).unwrap().into_matrix();
        let rg = reg(vec![3, -5, 12]);
        let z = CMat::from_fn(3, 3, |i, j| if i == j { c(0.01, 0.03) } else { c(0.002, 0.01) });
        let s = CMat::from_fn(3, 3, |i, j| c(0.1 * i as f64, 0.05 * j as f64));
        let l = Hermitian::new(CMat::from_fn(3, 3, |i, j| if i == j { c(0.3, 0.0) } else { c(0.01, 0.0) }))
            .unwrap()
            .into_matrix();
        let ph = regulator_constraint(&rg, Frame::Phase, &MatExpr::constant(&v), &MatExpr::constant(&s), &MatExpr::constant(&l), &z)
            .unwrap()
            .eval(&[]);
        let to_seq = |m: &CMat| a.adjoint() * m * &a;
        let sq = regulator_constraint(
            &rg,
            Frame::Sequence,
            &MatExpr::constant(&to_seq(&v)),
            &MatExpr::constant(&to_seq(&s)),
            &MatExpr::constant(&to_seq(&l)),
            &to_seq(&z),
        )
        .unwrap()
        .eval(&[]);
        assert!((&a * sq * a.adjoint() - ph).norm() < 1e-13);
    }
}
