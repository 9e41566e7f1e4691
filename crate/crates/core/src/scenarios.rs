//! Initial configurations: homogeneous fluids, droplets, planar interfaces
//! and plain lattices.
//!
//! All generators place molecules on simple-cubic or fcc lattice points,
//! draw Maxwell-Boltzmann momenta from a seeded ChaCha stream, remove the
//! net momentum and rescale to the requested temperature exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::integrate::velocity_rescale;
use crate::math::{Quat, Vec3};
use crate::model::{DipoleSite, LjForm, LjSite, LongRange, MoleculeState, SimConfig, Species};
use crate::units::{Dimension, UnitSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Homogeneous,
    Droplet,
    PlanarInterface,
    Lattice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    SimpleCubic,
    Fcc,
}

impl LatticeKind {
    fn basis(self) -> &'static [[f64; 3]] {
        match self {
            LatticeKind::SimpleCubic => &[[0.0, 0.0, 0.0]],
            LatticeKind::Fcc => &[[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]],
        }
    }

    /// Highest number density of touching spheres of diameter `sigma`.
    fn close_packing(self, sigma: f64) -> f64 {
        match self {
            LatticeKind::SimpleCubic => 1.0 / sigma.powi(3),
            LatticeKind::Fcc => std::f64::consts::SQRT_2 / sigma.powi(3),
        }
    }
}

/// Scenario parameters in internal units. Densities are number densities.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Target molecule count for homogeneous and lattice fillers.
    pub n: Option<usize>,
    /// Box edges; derived from `n` and `density` when absent.
    pub box_len: Option<Vec3>,
    /// Bulk (homogeneous) or liquid (droplet, interface) density.
    pub density: f64,
    pub vapor_density: f64,
    pub temperature: f64,
    pub species: usize,
    pub lattice: LatticeKind,
    pub droplet_radius: f64,
    /// Droplet center displacement from the box center, as a fraction of the box.
    pub droplet_offset: Vec3,
    pub slab_thickness: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Lattice,
            n: None,
            box_len: None,
            density: 0.6223,
            vapor_density: 0.01,
            temperature: 0.95,
            species: 0,
            lattice: LatticeKind::SimpleCubic,
            droplet_radius: 0.0,
            droplet_offset: Vec3::splat(0.05),
            slab_thickness: 0.0,
            seed: 0,
        }
    }
}

/// Molar mass of a CH2 group and of oxygen, in kg/mol.
const M_CH2: f64 = 14.027e-3;
const M_O: f64 = 15.999e-3;

/// Three LJ sites and a central point dipole shaped like ethylene oxide, in
/// atomic units. Site sizes and energies: CH2 3.5266 A / 84.739 K, O
/// 3.0929 A / 62.126 K; dipole 2.459 D along the symmetry axis. The ring
/// geometry is a generic three-membered ring, not a fitted model.
pub fn ethylene_oxide_standin(id: usize) -> Result<Species> {
    let u = UnitSystem::atomic();
    let ang = |x: f64| u.to_internal(x * 1e-10, Dimension::Length);
    let kelvin = |t: f64| u.to_internal(t, Dimension::Temperature);
    let raw =
        [(Vec3::new(-0.78, 0.0, -0.42), M_CH2), (Vec3::new(0.78, 0.0, -0.42), M_CH2), (Vec3::new(0.0, 0.0, 0.78), M_O)];
    let mass: f64 = raw.iter().map(|(_, m)| m).sum();
    let com = raw.iter().fold(Vec3::ZERO, |a, (p, m)| a + *p * *m) * (1.0 / mass);
    let pos: Vec<Vec3> = raw.iter().map(|(p, _)| (*p - com) * ang(1.0)).collect();
    let mut inertia = Vec3::ZERO;
    for (p, (_, m)) in pos.iter().zip(&raw) {
        inertia += Vec3::new(p.y * p.y + p.z * p.z, p.x * p.x + p.z * p.z, p.x * p.x + p.y * p.y) * *m;
    }
    let lj = vec![
        LjSite { pos: pos[0], sigma: ang(3.5266), epsilon: kelvin(84.739) },
        LjSite { pos: pos[1], sigma: ang(3.5266), epsilon: kelvin(84.739) },
        LjSite { pos: pos[2], sigma: ang(3.0929), epsilon: kelvin(62.126) },
    ];
    let mu = u.to_internal(2.459, Dimension::Dipole);
    let dip = vec![DipoleSite { pos: Vec3::ZERO, axis: Vec3::new(0.0, 0.0, 1.0), mu }];
    Species::new(id, "ethylene-oxide-standin", lj, vec![], dip, vec![], mass, inertia)
}

fn lattice_points(kind: LatticeKind, cells: [usize; 3], box_len: Vec3) -> Vec<Vec3> {
    let a = Vec3::new(box_len.x / cells[0] as f64, box_len.y / cells[1] as f64, box_len.z / cells[2] as f64);
    let mut out = Vec::with_capacity(cells.iter().product::<usize>() * kind.basis().len());
    for z in 0..cells[2] {
        for y in 0..cells[1] {
            for x in 0..cells[0] {
                for b in kind.basis() {
                    out.push(Vec3::new(
                        (x as f64 + 0.25 + b[0]) * a.x,
                        (y as f64 + 0.25 + b[1]) * a.y,
                        (z as f64 + 0.25 + b[2]) * a.z,
                    ));
                }
            }
        }
    }
    out
}

/// Lattice cells per axis that fill `box_len` at roughly `density`.
fn cells_for(kind: LatticeKind, box_len: Vec3, density: f64) -> [usize; 3] {
    let a = (kind.basis().len() as f64 / density).cbrt();
    [0, 1, 2].map(|k| ((box_len[k] / a).round() as usize).max(1))
}

fn min_image(mut d: Vec3, l: Vec3) -> Vec3 {
    for k in 0..3 {
        d[k] -= l[k] * (d[k] / l[k]).round();
    }
    d
}

fn largest_sigma(sp: &Species) -> f64 {
    sp.lj_sites.iter().map(|s| s.sigma).fold(0.0, f64::max)
}

fn check_density(spec: &ScenarioSpec, sp: &Species, density: f64, what: &str) -> Result<()> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::InfeasibleDensity(format!("{what} density {density} must be positive")));
    }
    let sigma = largest_sigma(sp);
    if sigma > 0.0 && density > spec.lattice.close_packing(sigma) {
        return Err(Error::InfeasibleDensity(format!(
            "{what} density {density} exceeds close packing {} for this lattice",
            spec.lattice.close_packing(sigma)
        )));
    }
    Ok(())
}

/// Builds the configuration and initial states for a scenario.
///
/// `base` supplies species, cutoff and run parameters; the returned config has
/// its box set by the scenario. Droplets and interfaces use the truncated and
/// shifted LJ form without long-range corrections.
pub fn generate(spec: &ScenarioSpec, base: &SimConfig) -> Result<(SimConfig, Vec<MoleculeState>)> {
    let sp = base
        .species
        .get(spec.species)
        .ok_or_else(|| Error::InvalidInput(format!("unknown species {}", spec.species)))?;
    if !(spec.temperature >= 0.0) {
        return Err(Error::InvalidInput("temperature must be non-negative".into()));
    }
    check_density(spec, sp, spec.density, "liquid")?;
    let mut cfg = base.clone();
    let positions = match spec.kind {
        ScenarioKind::Homogeneous | ScenarioKind::Lattice => {
            let (cells, box_len) = match (spec.box_len, spec.n) {
                (Some(l), _) => (cells_for(spec.lattice, l, spec.density), l),
                (None, Some(n)) => {
                    if n == 0 {
                        return Err(Error::InvalidInput("molecule count must be positive".into()));
                    }
                    let per = spec.lattice.basis().len() as f64;
                    let side = ((n as f64 / per).cbrt().round() as usize).max(1);
                    let actual = side.pow(3) as f64 * per;
                    (([side; 3]), Vec3::splat((actual / spec.density).cbrt()))
                }
                (None, None) => return Err(Error::MissingKey("scenario.n or box".into())),
            };
            cfg.box_len = box_len;
            lattice_points(spec.lattice, cells, box_len)
        }
        ScenarioKind::Droplet | ScenarioKind::PlanarInterface => {
            let l = spec.box_len.ok_or_else(|| Error::MissingKey("box".into()))?;
            cfg.box_len = l;
            cfg.lj_form = LjForm::TruncatedShifted;
            cfg.long_range = LongRange::None;
            let liquid_cells = cells_for(spec.lattice, l, spec.density);
            let spacing = (0..3).map(|k| l[k] / liquid_cells[k] as f64).fold(0.0, f64::max);
            let center = l * 0.5 + spec.droplet_offset.hadamard(l);
            let inside = |r: Vec3| match spec.kind {
                ScenarioKind::Droplet => min_image(r - center, l).norm() - spec.droplet_radius,
                _ => (r.z - 0.5 * l.z).abs() - 0.5 * spec.slab_thickness,
            };
            if spec.kind == ScenarioKind::Droplet
                && !(spec.droplet_radius > 0.0 && 2.0 * spec.droplet_radius < l.x.min(l.y).min(l.z))
            {
                return Err(Error::InvalidInput("droplet radius must be positive and fit in the box".into()));
            }
            if spec.kind == ScenarioKind::PlanarInterface && !(spec.slab_thickness > 0.0 && spec.slab_thickness < l.z) {
                return Err(Error::InvalidInput("slab thickness must be positive and below the box height".into()));
            }
            let mut pts: Vec<Vec3> =
                lattice_points(spec.lattice, liquid_cells, l).into_iter().filter(|&r| inside(r) < 0.0).collect();
            if spec.vapor_density > 0.0 {
                check_density(spec, sp, spec.vapor_density, "vapor")?;
                let vc = cells_for(spec.lattice, l, spec.vapor_density);
                pts.extend(lattice_points(spec.lattice, vc, l).into_iter().filter(|&r| inside(r) > spacing));
            }
            pts
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut states: Vec<MoleculeState> =
        positions.into_iter().enumerate().map(|(i, r)| MoleculeState::at_rest(i as u64, spec.species, r)).collect();
    let sd_v = (spec.temperature / sp.mass).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for s in &mut states {
        s.v = Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)) * sd_v;
        if !sp.is_symmetric() {
            if spec.kind == ScenarioKind::Homogeneous {
                s.q = random_orientation(&mut rng);
            }
            let mut jb = Vec3::ZERO;
            for k in 0..3 {
                let z: f64 = normal.sample(&mut rng);
                jb[k] = z * (spec.temperature * sp.inertia[k]).sqrt();
            }
            s.j = s.q.rotate(jb);
        }
    }
    if !states.is_empty() {
        let total_p = states.iter().fold(Vec3::ZERO, |a, s| a + s.v * sp.mass);
        let v_cm = total_p * (1.0 / (sp.mass * states.len() as f64));
        for s in &mut states {
            s.v -= v_cm;
        }
        if spec.temperature > 0.0 {
            velocity_rescale(&mut states, &cfg.species, spec.temperature)?;
        } else {
            for s in &mut states {
                s.v = Vec3::ZERO;
                s.j = Vec3::ZERO;
            }
        }
    }
    Ok((cfg, states))
}

fn random_orientation(rng: &mut impl Rng) -> Quat {
    loop {
        let q = Quat::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if q.norm() > 1e-6 {
            return q.normalized();
        }
    }
}

/// Number density in slabs along one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
    pub bin_width: f64,
}

pub fn measure_profile(states: &[MoleculeState], box_len: Vec3, axis: usize, bins: usize) -> Result<Profile> {
    if bins < 2 || axis > 2 {
        return Err(Error::InvalidInput("profile needs at least two bins along axis 0, 1 or 2".into()));
    }
    let w = box_len[axis] / bins as f64;
    let mut counts = vec![0usize; bins];
    for s in states {
        let x = s.r[axis].rem_euclid(box_len[axis]);
        let b = ((x / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let vol = w * box_len.x * box_len.y * box_len.z / box_len[axis];
    let density = counts.iter().map(|&c| c as f64 / vol).collect();
    Ok(Profile { counts, density, bin_width: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::instantaneous_temperature;

    fn lj_base() -> SimConfig {
        SimConfig::lj(Vec3::splat(10.0), 2.5, 0.002)
    }

    fn spec(kind: ScenarioKind) -> ScenarioSpec {
        ScenarioSpec { kind, seed: 11, ..Default::default() }
    }

    fn momentum(states: &[MoleculeState]) -> Vec3 {
        states.iter().fold(Vec3::ZERO, |a, s| a + s.v)
    }

    fn min_distance(states: &[MoleculeState], l: Vec3) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                m = m.min(min_image(states[i].r - states[j].r, l).norm());
            }
        }
        m
    }

    #[test]
    fn lattice_of_one_thousand() {
        let s = ScenarioSpec { n: Some(1000), ..spec(ScenarioKind::Lattice) };
        let (cfg, st) = generate(&s, &lj_base()).unwrap();
        assert_eq!(st.len(), 1000);
        let a = cfg.box_len.x / 10.0;
        assert!((cfg.box_len.x - (1000.0 / 0.6223f64).cbrt()).abs() < 1e-12);
        for m in &st {
            for k in 0..3 {
                let f = m.r[k] / a - 0.25;
                assert!((f - f.round()).abs() < 1e-9);
            }
        }
        assert!(momentum(&st).norm() < 1e-12);
        assert!((instantaneous_temperature(&st, &cfg.species).unwrap() - 0.95).abs() < 1e-12);
        assert!(min_distance(&st, cfg.box_len) > 0.7);
    }

    #[test]
    fn fcc_lattice() {
        let s = ScenarioSpec { n: Some(4000), lattice: LatticeKind::Fcc, density: 0.8, ..spec(ScenarioKind::Lattice) };
        let (cfg, st) = generate(&s, &lj_base()).unwrap();
        assert_eq!(st.len(), 4000);
        let d = min_distance(&st[..500], cfg.box_len);
        assert!((d - (5.0f64).cbrt() / 2f64.sqrt()).abs() < 1e-9, "{d}");
    }

    #[test]
    fn deterministic_for_seed() {
        let s = ScenarioSpec { n: Some(125), ..spec(ScenarioKind::Homogeneous) };
        let a = generate(&s, &lj_base()).unwrap().1;
        let b = generate(&s, &lj_base()).unwrap().1;
        assert_eq!(a, b);
        let c = generate(&ScenarioSpec { seed: 12, ..s }, &lj_base()).unwrap().1;
        assert_ne!(a, c);
    }

    #[test]
    fn droplet_census() {
        let l = Vec3::splat(30.0);
        let s =
            ScenarioSpec { box_len: Some(l), droplet_radius: 8.0, vapor_density: 0.0, ..spec(ScenarioKind::Droplet) };
        let (cfg, st) = generate(&s, &lj_base()).unwrap();
        assert_eq!(cfg.lj_form, LjForm::TruncatedShifted);
        let center = l * 0.5 + Vec3::splat(0.05).hadamard(l);
        for m in &st {
            assert!(min_image(m.r - center, l).norm() < 8.0);
        }
        let expect = 4.0 / 3.0 * std::f64::consts::PI * 512.0 * 0.6223;
        let rel = (st.len() as f64 - expect).abs() / expect;
        assert!(rel < 0.05, "{} vs {expect}", st.len());
        assert!(momentum(&st).norm() < 1e-12);
    }

    #[test]
    fn droplet_with_vapor_keeps_gap() {
        let l = Vec3::splat(30.0);
        let s = ScenarioSpec { box_len: Some(l), droplet_radius: 8.0, ..spec(ScenarioKind::Droplet) };
        let (cfg, st) = generate(&s, &lj_base()).unwrap();
        assert!(min_distance(&st, cfg.box_len) > 0.7);
        assert!((instantaneous_temperature(&st, &cfg.species).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn interface_has_two_plateaus() {
        let l = Vec3::new(15.0, 15.0, 60.0);
        let s = ScenarioSpec {
            box_len: Some(l),
            slab_thickness: 20.0,
            vapor_density: 0.02,
            ..spec(ScenarioKind::PlanarInterface)
        };
        let (_, st) = generate(&s, &lj_base()).unwrap();
        let p = measure_profile(&st, l, 2, 12).unwrap();
        assert_eq!(p.counts.iter().sum::<usize>(), st.len());
        let liquid = (p.density[5] + p.density[6]) / 2.0;
        let vapor = (p.density[0] + p.density[11]) / 2.0;
        assert!((liquid - 0.6223).abs() / 0.6223 < 0.1, "{liquid}");
        assert!((vapor - 0.02).abs() / 0.02 < 0.5, "{vapor}");
    }

    #[test]
    fn profile_examples() {
        let p = measure_profile(&[], Vec3::splat(10.0), 0, 4).unwrap();
        assert_eq!(p.counts, vec![0; 4]);
        assert!(measure_profile(&[], Vec3::splat(10.0), 0, 1).is_err());
        let s = ScenarioSpec { n: Some(4096), ..spec(ScenarioKind::Homogeneous) };
        let (cfg, st) = generate(&s, &lj_base()).unwrap();
        let p = measure_profile(&st, cfg.box_len, 1, 8).unwrap();
        let mean = st.len() as f64 / 8.0;
        for &c in &p.counts {
            assert!((c as f64 - mean).abs() <= 5.0 * mean.sqrt());
        }
    }

    #[test]
    fn infeasible_density_is_rejected() {
        let s = ScenarioSpec { n: Some(100), density: 1.5, ..spec(ScenarioKind::Lattice) };
        assert!(matches!(generate(&s, &lj_base()), Err(Error::InfeasibleDensity(_))));
        let s = ScenarioSpec { n: Some(100), density: -1.0, ..spec(ScenarioKind::Lattice) };
        assert!(matches!(generate(&s, &lj_base()), Err(Error::InfeasibleDensity(_))));
    }

    #[test]
    fn ethylene_oxide_homogeneous() {
        let u = UnitSystem::atomic();
        let sp = ethylene_oxide_standin(0).unwrap();
        assert_eq!(sp.rotor(), crate::model::Rotor::Nonlinear);
        let mut base = lj_base();
        base.species = vec![sp];
        base.cutoff = u.to_internal(1.5e-9, Dimension::Length);
        let rho = u.to_internal(16.9, Dimension::Density);
        let t = u.to_internal(375.0, Dimension::Temperature);
        let s = ScenarioSpec { n: Some(216), density: rho, temperature: t, ..spec(ScenarioKind::Homogeneous) };
        let (cfg, st) = generate(&s, &base).unwrap();
        assert_eq!(st.len(), 216);
        assert!(((st.len() as f64 / cfg.volume()) - rho).abs() / rho < 1e-12);
        assert!((instantaneous_temperature(&st, &cfg.species).unwrap() - t).abs() / t < 1e-12);
    }
}
