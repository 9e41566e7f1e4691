//! Long-range corrections beyond the cutoff: the isotropic mean-field
//! dispersion tail and the reaction field for dipoles.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::Vec3;

use super::{ElectroResult, PairResult};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TailCorrection {
    pub energy_per_molecule: f64,
    pub energy: f64,
    pub pressure: f64,
}

/// Mean-field LJ tail for a homogeneous fluid of number density `density`:
///
/// ```text
/// U/N = (8/3) pi rho eps sigma^3 [ (1/3)(sigma/rc)^9 - (sigma/rc)^3 ]
/// P   = (16/3) pi rho^2 eps sigma^3 [ (2/3)(sigma/rc)^9 - (sigma/rc)^3 ]
/// ```
pub fn lj_tail_correction(density: f64, sigma: f64, epsilon: f64, rc: f64, n: usize) -> TailCorrection {
    let sr3 = (sigma / rc).powi(3);
    let sr9 = sr3 * sr3 * sr3;
    let s3 = sigma.powi(3);
    let per = 8.0 / 3.0 * PI * density * epsilon * s3 * (sr9 / 3.0 - sr3);
    let pressure = 16.0 / 3.0 * PI * density * density * epsilon * s3 * (2.0 / 3.0 * sr9 - sr3);
    TailCorrection { energy_per_molecule: per, energy: per * n as f64, pressure }
}

/// Prefactor `2(eps_rf - 1)/(2 eps_rf + 1)`; tends to 1 for a conducting
/// boundary (`eps_rf = inf`).
pub fn reaction_field_factor(eps_rf: f64) -> Result<f64> {
    if !(eps_rf >= 1.0) {
        return Err(Error::InvalidInput(format!("reaction-field permittivity {eps_rf} must be >= 1")));
    }
    if eps_rf.is_infinite() {
        return Ok(1.0);
    }
    Ok(2.0 * (eps_rf - 1.0) / (2.0 * eps_rf + 1.0))
}

/// Reaction-field energy of one dipole pair inside the cutoff sphere:
/// `U = -k mu_a . mu_b / rc^3` with `k = reaction_field_factor(eps_rf)`.
///
/// The energy does not depend on the separation, so there is no force; the
/// torques are `tau_a = k mu_a mu_b / rc^3 (e_a x e_b)` and its negative.
///
/// Convention: the total reaction-field energy is
/// `-1/2 sum_i mu_i . E_rf(i)` with `E_rf(i) = k/rc^3 sum_{j in sphere(i)} mu_j`
/// including `j = i`. Each distinct pair therefore contributes this term once,
/// and every dipole contributes [`reaction_field_self_energy`] once.
pub fn reaction_field_pair(
    mu_a: f64,
    axis_a: Vec3,
    mu_b: f64,
    axis_b: Vec3,
    eps_rf: f64,
    rc: f64,
) -> Result<ElectroResult> {
    let k = reaction_field_factor(eps_rf)?;
    let pre = k * mu_a * mu_b / (rc * rc * rc);
    let u = -pre * axis_a.dot(axis_b);
    let tau = axis_a.cross(axis_b) * pre;
    Ok(ElectroResult { pair: PairResult { u, f: Vec3::ZERO, virial: 0.0 }, torque_a: tau, torque_b: -tau })
}

/// Interaction of a dipole with its own reaction field: `-k mu^2 / (2 rc^3)`.
pub fn reaction_field_self_energy(mu: f64, eps_rf: f64, rc: f64) -> Result<f64> {
    Ok(-0.5 * reaction_field_factor(eps_rf)? * mu * mu / (rc * rc * rc))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson on [a, b] with n (even) intervals.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    fn u_lj(r: f64) -> f64 {
        let s6 = r.powi(-6);
        4.0 * (s6 * s6 - s6)
    }

    #[test]
    fn tail_vanishes_for_zero_density_and_huge_cutoff() {
        let t = lj_tail_correction(0.0, 1.0, 1.0, 2.5, 100);
        assert_eq!((t.energy, t.pressure), (0.0, 0.0));
        let t = lj_tail_correction(0.6223, 1.0, 1.0, 1e3, 1);
        assert!(t.energy.abs() < 1e-8 && t.pressure.abs() < 1e-8);
    }

    #[test]
    fn tail_matches_quadrature() {
        let rho = 0.6223;
        let rc = 2.5;
        // Substitute r = rc / x to map [rc, inf) onto (0, 1].
        let integrand = |x: f64| {
            if x == 0.0 {
                return 0.0;
            }
            let r = rc / x;
            u_lj(r) * rho * 4.0 * PI * r * r * rc / (x * x)
        };
        let mean_field = 0.5 * simpson(integrand, 0.0, 1.0, 20_000);
        let t = lj_tail_correction(rho, 1.0, 1.0, rc, 10);
        assert!((t.energy_per_molecule - mean_field).abs() < 1e-8, "{} vs {mean_field}", t.energy_per_molecule);
        assert!((t.energy - 10.0 * t.energy_per_molecule).abs() < 1e-15);

        // P_tail = -(2/3) pi rho^2 int r^3 u'(r) dr
        let du = |r: f64| {
            let s6 = r.powi(-6);
            -24.0 * (2.0 * s6 * s6 - s6) / r
        };
        let integrand = |x: f64| {
            if x == 0.0 {
                return 0.0;
            }
            let r = rc / x;
            r.powi(3) * du(r) * rc / (x * x)
        };
        let p = -2.0 / 3.0 * PI * rho * rho * simpson(integrand, 0.0, 1.0, 20_000);
        assert!((t.pressure - p).abs() < 1e-8, "{} vs {p}", t.pressure);
    }

    #[test]
    fn reaction_field_limits() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let vac = reaction_field_pair(1.0, z, 1.0, z, 1.0, 2.5).unwrap();
        assert_eq!(vac.pair.u, 0.0);
        assert_eq!(vac.torque_a, Vec3::ZERO);
        let none = reaction_field_pair(0.0, z, 1.0, z, f64::INFINITY, 2.5).unwrap();
        assert_eq!(none.pair.u, 0.0);
        let cond = reaction_field_pair(1.0, z, 1.0, z, f64::INFINITY, 2.5).unwrap();
        assert!((cond.pair.u + 0.064).abs() < 1e-15);
        assert!(reaction_field_pair(1.0, z, 1.0, z, 0.5, 2.5).is_err());
        assert!(reaction_field_factor(f64::NAN).is_err());
        assert_eq!(reaction_field_self_energy(1.0, 1.0, 2.5).unwrap(), 0.0);
    }
}
