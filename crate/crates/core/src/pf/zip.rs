//! Voltage-dependent (ZIP) load evaluation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ZERO};
use crate::network::{Connection, ZipLoad};

/// Power and current drawn at each terminal phase of a load, ordered like
/// `load.phases`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadDraw {
    pub power: Vec<Complex64>,
    pub current: Vec<Complex64>,
}

/// Multiplier on nominal power at per-unit magnitude `u`. Below the floor
/// the whole load behaves as a constant impedance sized at the floor.
fn zip_factor(load: &ZipLoad, u: f64) -> f64 {
    if u >= load.v_floor {
        load.zip.scale(u)
    } else {
        let r = u / load.v_floor;
        load.zip.scale(load.v_floor) * r * r
    }
}

/// Evaluates a load at terminal voltages `v` (one phasor per load phase).
///
/// Wye: `s = s_nom·(w_Z|v|² + w_I|v| + w_P)` per phase. Delta: the same law
/// on each phase-pair voltage (per-unit on √3), mapped to line currents
/// `I_p = (s_pq/V_pq)* − (s_rp/V_rp)*`.
pub fn evaluate_zip_load(load: &ZipLoad, v: &[Complex64]) -> Result<LoadDraw> {
    evaluate_with(load, v, |u| zip_factor(load, u))
}

/// As [`evaluate_zip_load`] without the constant-impedance share, which
/// [`impedance_admittance`] represents exactly.
pub fn evaluate_zip_remainder(load: &ZipLoad, v: &[Complex64]) -> Result<LoadDraw> {
    evaluate_with(load, v, |u| zip_factor(load, u) - load.zip.z * u * u)
}

/// The constant-impedance share as an admittance over `load.phases`
/// (`I = Y V` draws exactly that share at any voltage).
pub fn impedance_admittance(load: &ZipLoad) -> CMat {
    let n = load.phases.len();
    let mut y = CMat::zeros(n, n);
    if load.zip.z == 0.0 {
        return y;
    }
    match load.connection {
        Connection::Wye => {
            for (k, s) in load.s_nominal.iter().enumerate() {
                y[(k, k)] = (s * load.zip.z).conj();
            }
        }
        Connection::Delta => {
            for (k, (p, q)) in load.delta_pairs().into_iter().enumerate() {
                let ip = load.phases.position(p).expect("pair phase in load phases");
                let iq = load.phases.position(q).expect("pair phase in load phases");
                // Pair magnitude is per-unit on √3.
                let ypq = (load.s_nominal[k] * load.zip.z).conj() / 3.0;
                y[(ip, ip)] += ypq;
                y[(iq, iq)] += ypq;
                y[(ip, iq)] -= ypq;
                y[(iq, ip)] -= ypq;
            }
        }
    }
    y
}

fn evaluate_with(load: &ZipLoad, v: &[Complex64], factor: impl Fn(f64) -> f64) -> Result<LoadDraw> {
    if v.len() != load.phases.len() {
        return Err(Error::Dimension(format!(
            "load `{}` has {} phases, got {} voltages",
            load.id,
            load.phases.len(),
            v.len()
        )));
    }
    let mut current = vec![ZERO; v.len()];
    match load.connection {
        Connection::Wye => {
            for (k, &vp) in v.iter().enumerate() {
                let u = vp.norm();
                if u == 0.0 {
                    return Err(Error::ZeroVoltage(load.id.clone()));
                }
                let s = load.s_nominal[k] * factor(u);
                current[k] = (s / vp).conj();
            }
        }
        Connection::Delta => {
            for (k, (p, q)) in load.delta_pairs().into_iter().enumerate() {
                let ip = load.phases.position(p).expect("pair phase in load phases");
                let iq = load.phases.position(q).expect("pair phase in load phases");
                let vpq = v[ip] - v[iq];
                let u = vpq.norm() / 3f64.sqrt();
                if u == 0.0 {
                    return Err(Error::ZeroVoltage(load.id.clone()));
                }
                let s = load.s_nominal[k] * factor(u);
                let ipq = (s / vpq).conj();
                current[ip] += ipq;
                current[iq] -= ipq;
            }
        }
    }
    let power = v.iter().zip(&current).map(|(vp, ip)| vp * ip.conj()).collect();
    Ok(LoadDraw { power, current })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, polar};
    use crate::network::{PhaseSet, ZipWeights};

    fn wye(zip: ZipWeights) -> ZipLoad {
        ZipLoad {
            id: "l".into(),
            bus: "b".into(),
            phases: "a".parse().unwrap(),
            connection: Connection::Wye,
            s_nominal: vec![c(0.5, 0.2)],
            zip,
            v_floor: 0.85,
        }
    }

    #[test]
    fn zip_scaling_cases() {
        let s_nom = c(0.5, 0.2);
        let p = evaluate_zip_load(&wye(ZipWeights::CONSTANT_POWER), &[polar(0.93, -7.0)]).unwrap();
        assert!((p.power[0] - s_nom).norm() < 1e-15);
        let z = evaluate_zip_load(&wye(ZipWeights::CONSTANT_IMPEDANCE), &[polar(0.9, 3.0)]).unwrap();
        assert!((z.power[0] - s_nom * 0.81).norm() < 1e-14);
        let mixed = ZipWeights { z: 0.2, i: 0.3, p: 0.5 };
        let m = evaluate_zip_load(&wye(mixed), &[polar(1.0, 11.0)]).unwrap();
        assert!((m.power[0] - s_nom).norm() < 1e-14);
    }

    #[test]
    fn below_floor_reverts_to_impedance() {
        let l = wye(ZipWeights::CONSTANT_POWER);
        let d = evaluate_zip_load(&l, &[c(0.425, 0.0)]).unwrap();
        // Half the floor voltage → a quarter of the nominal power.
        assert!((d.power[0] - c(0.5, 0.2) * 0.25).norm() < 1e-14);
    }

    #[test]
    fn zero_voltage_is_an_error() {
        let l = wye(ZipWeights::CONSTANT_POWER);
        assert!(matches!(evaluate_zip_load(&l, &[c(0.0, 0.0)]), Err(Error::ZeroVoltage(_))));
    }

    #[test]
    fn balanced_delta_draws_its_nominal_power() {
        let l = ZipLoad {
            id: "d".into(),
            bus: "b".into(),
            phases: PhaseSet::ABC,
            connection: Connection::Delta,
            s_nominal: vec![c(0.3, 0.1); 3],
            zip: ZipWeights::CONSTANT_POWER,
            v_floor: 0.85,
        };
        let v = [polar(1.0, 0.0), polar(1.0, -120.0), polar(1.0, 120.0)];
        let d = evaluate_zip_load(&l, &v).unwrap();
        let total: Complex64 = d.power.iter().sum();
        assert!((total - c(0.9, 0.3)).norm() < 1e-14);
        for p in &d.power {
            assert!((p - c(0.3, 0.1)).norm() < 1e-14);
        }
        let isum: Complex64 = d.current.iter().sum();
        assert!(isum.norm() < 1e-14);
    }

    #[test]
    fn impedance_share_plus_remainder_is_the_whole_load() {
        let v = [polar(0.97, -1.0), polar(0.83, -121.5), polar(0.95, 118.7)];
        for connection in [Connection::Wye, Connection::Delta] {
            let l = ZipLoad {
                id: "m".into(),
                bus: "b".into(),
                phases: PhaseSet::ABC,
                connection,
                s_nominal: vec![c(0.3, 0.1), c(0.2, 0.15), c(0.25, 0.05)],
                zip: ZipWeights { z: 0.3, i: 0.45, p: 0.25 },
                v_floor: 0.85,
            };
            let full = evaluate_zip_load(&l, &v).unwrap();
            let rest = evaluate_zip_remainder(&l, &v).unwrap();
            let y = impedance_admittance(&l);
            for k in 0..3 {
                let iy: Complex64 = (0..3).map(|j| y[(k, j)] * v[j]).sum();
                let sy = v[k] * iy.conj();
                assert!((rest.power[k] + sy - full.power[k]).norm() < 1e-14, "{connection:?} phase {k}");
            }
        }
    }
}
