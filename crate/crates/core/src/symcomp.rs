//! Fortescue (symmetrical component) transformation.
//!
//! Uses the power-invariant normalization
//! `A = (1/√3)·[[1,1,1],[1,a²,a],[1,a,a²]]`, `a = e^{i2π/3}`, so that `A` is
//! unitary and second-order quantities transform by conjugation:
//! `m_abc = A m_012 A^H`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE};

/// `a = 1∠120°`.
pub fn rotor() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

pub fn fortescue_matrix() -> CMat {
    let a = rotor();
    let a2 = a * a;
    let s = 1.0 / 3f64.sqrt();
    CMat::from_row_slice(3, 3, &[ONE, ONE, ONE, ONE, a2, a, ONE, a, a2]).scale(s)
}

fn check3(m: &CMat) -> Result<()> {
    if m.nrows() != 3 || m.ncols() != 3 {
        return Err(Error::Dimension(format!(
            "sequence frame needs a 3x3 matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// A 3x3 second-order quantity in the phase (abc) frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFrame(CMat);

/// A 3x3 second-order quantity in the sequence (012) frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFrame(CMat);

impl PhaseFrame {
    pub fn new(m: CMat) -> Result<Self> {
        check3(&m)?;
        Ok(PhaseFrame(m))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }
}

impl SequenceFrame {
    pub fn new(m: CMat) -> Result<Self> {
        check3(&m)?;
        Ok(SequenceFrame(m))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }
}

/// `A^H m A`.
pub fn phase_to_sequence(m: &PhaseFrame) -> SequenceFrame {
    let a = fortescue_matrix();
    SequenceFrame(a.adjoint() * &m.0 * a)
}

/// `A m A^H`.
pub fn sequence_to_phase(m: &SequenceFrame) -> PhaseFrame {
    let a = fortescue_matrix();
    PhaseFrame(&a * &m.0 * a.adjoint())
}

/// Sequence impedance (or admittance) `A^H z A`; diagonal for circulant
/// (transposed, balanced) lines.
pub fn impedance_to_sequence(z_abc: &CMat) -> Result<CMat> {
    check3(z_abc)?;
    let a = fortescue_matrix();
    Ok(a.adjoint() * z_abc * a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frobenius, polar, to_cvec, Hermitian};

    #[test]
    fn matrix_entries_and_unitarity() {
        let a = fortescue_matrix();
        assert!((a[(0, 0)] - c(1.0 / 3f64.sqrt(), 0.0)).norm() < 1e-16);
        let err = frobenius(&(&a * a.adjoint() - CMat::identity(3, 3)));
        assert!(err < 1e-15, "{err}");
        assert!((a.determinant().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn balanced_voltage_maps_to_positive_sequence() {
        let v = to_cvec(&[polar(1.0, 0.0), polar(1.0, -120.0), polar(1.0, 120.0)]);
        let m = Hermitian::outer(&v).into_matrix();
        let seq = phase_to_sequence(&PhaseFrame::new(m.clone()).unwrap()).into_matrix();
        let expect = CMat::from_diagonal(&to_cvec(&[c(0.0, 0.0), c(3.0, 0.0), c(0.0, 0.0)]));
        assert!(frobenius(&(&seq - &expect)) < 1e-14);
        let back = sequence_to_phase(&SequenceFrame::new(seq).unwrap()).into_matrix();
        assert!(frobenius(&(&back - &m)) < 1e-14);
        for i in 0..3 {
            assert!((back[(i, i)].re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_and_zero_fixed() {
        let i3 = CMat::identity(3, 3);
        let s = phase_to_sequence(&PhaseFrame::new(i3.clone()).unwrap());
        assert!(frobenius(&(s.matrix() - &i3)) < 1e-15);
        let z = sequence_to_phase(&SequenceFrame::new(CMat::zeros(3, 3)).unwrap());
        assert_eq!(z.into_matrix(), CMat::zeros(3, 3));
    }

    #[test]
    fn circulant_line_diagonalizes() {
        let zs = c(0.3, 0.6);
        let zm = c(0.1, 0.2);
        let z = CMat::from_fn(3, 3, |i, j| if i == j { zs } else { zm });
        let seq = impedance_to_sequence(&z).unwrap();
        let expect = [c(0.5, 1.0), c(0.2, 0.4), c(0.2, 0.4)];
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { expect[i] } else { c(0.0, 0.0) };
                assert!((seq[(i, j)] - e).norm() < 1e-15);
            }
        }
        let scalar = CMat::from_diagonal_element(3, 3, c(0.7, -0.2));
        let s2 = impedance_to_sequence(&scalar).unwrap();
        assert!(frobenius(&(&s2 - &scalar)) < 1e-15);
    }

    #[test]
    fn asymmetric_real_impedance_is_not_diagonal() {
        let z = CMat::from_row_slice(
            3,
            3,
            &[c(1.0, 0.0), c(0.2, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(1.5, 0.0), c(0.3, 0.0), c(0.1, 0.0), c(0.3, 0.0), c(0.8, 0.0)],
        );
        let seq = impedance_to_sequence(&z).unwrap();
        // Independent route: explicit triple loop over A^H z A.
        let a = fortescue_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = c(0.0, 0.0);
                for k in 0..3 {
                    for l in 0..3 {
                        acc += a[(k, i)].conj() * z[(k, l)] * a[(l, j)];
                    }
                }
                assert!((acc - seq[(i, j)]).norm() < 1e-14);
            }
        }
        let off: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| seq[(i, j)].norm()).sum();
        assert!(off > 1e-3);
    }

    #[test]
    fn dimension_errors() {
        assert!(PhaseFrame::new(CMat::zeros(2, 2)).is_err());
        assert!(impedance_to_sequence(&CMat::zeros(2, 2)).is_err());
    }
}
