//! Site-site interaction kernels.
//!
//! Every kernel takes the separation `r_vec = r_a - r_b` and returns the
//! force on site `a`; site `b` receives the negated force.

mod corrections;
mod multipole;

pub use corrections::{
    lj_tail_correction, reaction_field_factor, reaction_field_pair, reaction_field_self_energy, TailCorrection,
};
pub use multipole::{electrostatic_pair, ElectroResult, PolarSite, Polarity};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::model::{LjForm, Species};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairResult {
    pub u: f64,
    /// Force on site a.
    pub f: Vec3,
    /// `r_vec . f`
    pub virial: f64,
}

/// Full 12-6 Lennard-Jones interaction.
#[inline]
pub fn lj_pair(sigma: f64, epsilon: f64, r_vec: Vec3) -> Result<PairResult> {
    let r2 = r_vec.norm2();
    if r2 == 0.0 {
        return Err(Error::SingularOverlap);
    }
    Ok(lj_from_r2(sigma * sigma, epsilon, r_vec, r2))
}

#[inline]
pub(crate) fn lj_from_r2(sigma2: f64, epsilon: f64, r_vec: Vec3, r2: f64) -> PairResult {
    let s2 = sigma2 / r2;
    let s6 = s2 * s2 * s2;
    let u = 4.0 * epsilon * (s6 * s6 - s6);
    let f_over_r = 24.0 * epsilon * (2.0 * s6 * s6 - s6) / r2;
    PairResult { u, f: r_vec * f_over_r, virial: f_over_r * r2 }
}

/// `4 eps [(sigma/rc)^12 - (sigma/rc)^6]`
pub fn lj_energy_at(sigma: f64, epsilon: f64, r: f64) -> f64 {
    let s6 = (sigma / r).powi(6);
    4.0 * epsilon * (s6 * s6 - s6)
}

/// Truncated and shifted Lennard-Jones: zero at and beyond `rc`, LJ force
/// inside.
pub fn ljts_pair(sigma: f64, epsilon: f64, r_vec: Vec3, rc: f64) -> Result<PairResult> {
    if !(rc > 0.0) {
        return Err(Error::InvalidInput("cutoff must be positive".into()));
    }
    let r2 = r_vec.norm2();
    if r2 == 0.0 {
        return Err(Error::SingularOverlap);
    }
    if r2 >= rc * rc {
        return Ok(PairResult::default());
    }
    let mut p = lj_from_r2(sigma * sigma, epsilon, r_vec, r2);
    p.u -= lj_energy_at(sigma, epsilon, rc);
    Ok(p)
}

/// Lorentz-Berthelot combination with a binary interaction parameter:
/// arithmetic-mean size, `eta`-scaled geometric-mean energy.
pub fn mix(sigma_i: f64, sigma_j: f64, eps_i: f64, eps_j: f64, eta: f64) -> Result<(f64, f64)> {
    if !(sigma_i > 0.0 && sigma_j > 0.0) || eps_i < 0.0 || eps_j < 0.0 || !(eta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "mixing needs positive sizes and eta, non-negative energies \
             (got sigma {sigma_i}, {sigma_j}; eps {eps_i}, {eps_j}; eta {eta})"
        )));
    }
    Ok((0.5 * (sigma_i + sigma_j), eta * (eps_i * eps_j).sqrt()))
}

/// Mixed LJ parameters for one site pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SitePairParams {
    pub sigma: f64,
    pub sigma2: f64,
    pub epsilon: f64,
    pub eta: f64,
    /// Energy subtracted inside the cutoff (zero for plain truncation).
    pub shift: f64,
}

/// Precomputed site-pair parameters for every ordered species pair.
///
/// Entry `(a, b)` lists the LJ site pairs row-major: site `i` of `a` times
/// site `j` of `b`. Entry `(b, a)` is its transpose.
#[derive(Clone, Debug)]
pub struct MixingTable {
    n_species: usize,
    entries: Vec<Vec<SitePairParams>>,
}

impl MixingTable {
    pub fn new(species: &[Species], eta: impl Fn(usize, usize) -> f64, form: LjForm, cutoff: f64) -> Result<Self> {
        let n = species.len();
        let mut entries = Vec::with_capacity(n * n);
        for a in species {
            for b in species {
                let e = eta(a.id, b.id);
                let mut list = Vec::with_capacity(a.lj_sites.len() * b.lj_sites.len());
                for sa in &a.lj_sites {
                    for sb in &b.lj_sites {
                        let (sigma, epsilon) = mix(sa.sigma, sb.sigma, sa.epsilon, sb.epsilon, e)?;
                        let shift = match form {
                            LjForm::Truncated => 0.0,
                            LjForm::TruncatedShifted => lj_energy_at(sigma, epsilon, cutoff),
                        };
                        list.push(SitePairParams { sigma, sigma2: sigma * sigma, epsilon, eta: e, shift });
                    }
                }
                entries.push(list);
            }
        }
        Ok(MixingTable { n_species: n, entries })
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> &[SitePairParams] {
        &self.entries[a * self.n_species + b]
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(r: f64) -> Vec3 {
        Vec3::new(r, 0.0, 0.0)
    }

    #[test]
    fn lj_examples() {
        let p = lj_pair(1.0, 1.0, x(1.0)).unwrap();
        assert_eq!(p.u, 0.0);
        let rmin = 2f64.powf(1.0 / 6.0);
        let p = lj_pair(1.0, 1.0, x(rmin)).unwrap();
        assert!((p.u + 1.0).abs() < 1e-14);
        assert!(p.f.norm() < 1e-12);
        let p = lj_pair(1.0, 1.0, x(2.5)).unwrap();
        assert!((p.u - -1.631_689e-2).abs() < 1e-8, "{}", p.u);
        assert!(matches!(lj_pair(1.0, 1.0, Vec3::ZERO), Err(Error::SingularOverlap)));
    }

    #[test]
    fn lj_repels_at_short_range() {
        let p = lj_pair(1.0, 1.0, x(0.9)).unwrap();
        assert!(p.f.x > 0.0);
        assert!((p.virial - 0.9 * p.f.x).abs() < 1e-12);
    }

    #[test]
    fn ljts_examples() {
        let p = ljts_pair(1.0, 1.0, x(2.5), 2.5).unwrap();
        assert_eq!((p.u, p.f), (0.0, Vec3::ZERO));
        let p = ljts_pair(1.0, 1.0, x(3.0), 2.5).unwrap();
        assert_eq!((p.u, p.f), (0.0, Vec3::ZERO));
        let p = ljts_pair(1.0, 1.0, x(1.0), 2.5).unwrap();
        assert!((p.u - 1.631_689e-2).abs() < 1e-8);
        let full = lj_pair(1.0, 1.0, x(1.0)).unwrap();
        assert_eq!(p.f, full.f);
        assert!(ljts_pair(1.0, 1.0, x(1.0), 0.0).is_err());
    }

    #[test]
    fn ljts_is_continuous_at_cutoff() {
        let rc = 2.5;
        let dr = 1e-9;
        let p = ljts_pair(1.0, 1.0, x(rc - dr), rc).unwrap();
        let slope = p.f.norm();
        assert!(p.u.abs() <= 4.0 * f64::EPSILON + slope * dr * 1.01);
    }

    #[test]
    fn mix_examples() {
        assert_eq!(mix(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), (1.0, 1.0));
        assert_eq!(mix(1.0, 3.0, 4.0, 9.0, 1.0).unwrap(), (2.0, 6.0));
        assert_eq!(mix(1.0, 3.0, 4.0, 9.0, 0.5).unwrap(), (2.0, 3.0));
        assert!(mix(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(mix(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mix_is_symmetric(si in 0.1f64..5.0, sj in 0.1f64..5.0, ei in 0.0f64..5.0, ej in 0.0f64..5.0, eta in 0.1f64..2.0) {
                prop_assert_eq!(mix(si, sj, ei, ej, eta).unwrap(), mix(sj, si, ej, ei, eta).unwrap());
            }

            #[test]
            fn lj_swap_negates_force(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
                let r = Vec3::new(x, y, z);
                prop_assume!(r.norm() > 0.5);
                let a = lj_pair(1.1, 0.7, r).unwrap();
                let b = lj_pair(1.1, 0.7, -r).unwrap();
                prop_assert_eq!(a.u, b.u);
                prop_assert_eq!(a.f, -b.f);
            }
        }
    }

    #[test]
    fn mixing_table_is_transposed() {
        let a = Species::lj_atom(0, 1.0, 4.0, 1.0).unwrap();
        let b = Species::lj_atom(1, 3.0, 9.0, 1.0).unwrap();
        let t = MixingTable::new(&[a, b], |_, _| 1.0, LjForm::Truncated, 2.5).unwrap();
        assert_eq!(t.get(0, 1)[0].sigma, 2.0);
        assert_eq!(t.get(1, 0)[0].epsilon, 6.0);
        assert_eq!(t.get(0, 1)[0].shift, 0.0);
    }
}
