//! Rigid molecular species, per-molecule dynamic state and run configuration.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct LjSite {
    pub pos: Vec3,
    pub sigma: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChargeSite {
    pub pos: Vec3,
    pub q: f64,
}

/// Point dipole with moment `mu` along the unit body-frame `axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct DipoleSite {
    pub pos: Vec3,
    pub axis: Vec3,
    pub mu: f64,
}

/// Linear point quadrupole. `q` is the axial moment `sum_i q_i z_i^2` of the
/// equivalent charge distribution along `axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadrupoleSite {
    pub pos: Vec3,
    pub axis: Vec3,
    pub q: f64,
}

/// How the rotational degrees of freedom of a species are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rotor {
    /// No rotational motion is integrated.
    Symmetric,
    /// One principal moment is zero; the index names that body axis.
    Linear(usize),
    Nonlinear,
}

impl Rotor {
    pub fn degrees_of_freedom(self) -> usize {
        match self {
            Rotor::Symmetric => 0,
            Rotor::Linear(_) => 2,
            Rotor::Nonlinear => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Species {
    pub id: usize,
    pub name: String,
    pub lj_sites: Vec<LjSite>,
    pub charges: Vec<ChargeSite>,
    pub dipoles: Vec<DipoleSite>,
    pub quadrupoles: Vec<QuadrupoleSite>,
    pub mass: f64,
    /// Principal moments of inertia in the body frame.
    pub inertia: Vec3,
    rotor: Rotor,
}

const AXIS_TOL: f64 = 1e-12;

impl Species {
    /// Validates the species and classifies its rotor type.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        name: impl Into<String>,
        lj_sites: Vec<LjSite>,
        charges: Vec<ChargeSite>,
        dipoles: Vec<DipoleSite>,
        quadrupoles: Vec<QuadrupoleSite>,
        mass: f64,
        inertia: Vec3,
    ) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidInput(format!("species {id}: mass must be positive")));
        }
        if inertia.x < 0.0 || inertia.y < 0.0 || inertia.z < 0.0 || !inertia.is_finite() {
            return Err(Error::InvalidInput(format!(
                "species {id}: principal moments must be finite and non-negative"
            )));
        }
        for s in &lj_sites {
            if !(s.sigma > 0.0) || s.epsilon < 0.0 {
                return Err(Error::InvalidInput(format!("species {id}: LJ site needs sigma > 0 and epsilon >= 0")));
            }
        }
        let axes = dipoles.iter().map(|d| d.axis).chain(quadrupoles.iter().map(|q| q.axis));
        for a in axes {
            if (a.norm() - 1.0).abs() > AXIS_TOL {
                return Err(Error::InvalidInput(format!("species {id}: polarity axis {a:?} is not a unit vector")));
            }
        }

        let mut species = Species {
            id,
            name: name.into(),
            lj_sites,
            charges,
            dipoles,
            quadrupoles,
            mass,
            inertia,
            rotor: Rotor::Symmetric,
        };
        species.rotor = species.classify()?;
        Ok(species)
    }

    /// A single Lennard-Jones site at the center of mass.
    pub fn lj_atom(id: usize, sigma: f64, epsilon: f64, mass: f64) -> Result<Self> {
        Species::new(
            id,
            "lj",
            vec![LjSite { pos: Vec3::ZERO, sigma, epsilon }],
            vec![],
            vec![],
            vec![],
            mass,
            Vec3::ZERO,
        )
    }

    fn classify(&self) -> Result<Rotor> {
        let zero: Vec<usize> = (0..3).filter(|&k| self.inertia[k] == 0.0).collect();
        let positions = self
            .lj_sites
            .iter()
            .map(|s| s.pos)
            .chain(self.charges.iter().map(|s| s.pos))
            .chain(self.dipoles.iter().map(|s| s.pos))
            .chain(self.quadrupoles.iter().map(|s| s.pos));
        match zero.len() {
            0 => Ok(Rotor::Nonlinear),
            3 => {
                let all_central = positions.clone().all(|p| p.norm() == 0.0);
                if all_central && self.dipoles.is_empty() && self.quadrupoles.is_empty() {
                    Ok(Rotor::Symmetric)
                } else {
                    Err(Error::ZeroInertia { species: self.id })
                }
            }
            1 => {
                let k = zero[0];
                let on_axis = |v: Vec3| (0..3).filter(|&m| m != k).all(|m| v[m].abs() < 1e-12);
                let ok = positions.clone().all(on_axis)
                    && self.dipoles.iter().all(|d| on_axis(d.axis))
                    && self.quadrupoles.iter().all(|q| on_axis(q.axis));
                if ok {
                    Ok(Rotor::Linear(k))
                } else {
                    Err(Error::ZeroInertia { species: self.id })
                }
            }
            _ => Err(Error::ZeroInertia { species: self.id }),
        }
    }

    pub fn rotor(&self) -> Rotor {
        self.rotor
    }

    pub fn is_symmetric(&self) -> bool {
        self.rotor == Rotor::Symmetric
    }

    pub fn has_polarities(&self) -> bool {
        !(self.charges.is_empty() && self.dipoles.is_empty() && self.quadrupoles.is_empty())
    }

    /// Body-frame angular velocity for a body-frame angular momentum.
    /// Axes with zero inertia get zero angular velocity.
    pub fn angular_velocity(&self, j_body: Vec3) -> Vec3 {
        let mut w = Vec3::ZERO;
        for k in 0..3 {
            if self.inertia[k] > 0.0 {
                w[k] = j_body[k] / self.inertia[k];
            }
        }
        w
    }

    pub fn rotational_energy(&self, j_body: Vec3) -> f64 {
        let mut e = 0.0;
        for k in 0..3 {
            if self.inertia[k] > 0.0 {
                e += 0.5 * j_body[k] * j_body[k] / self.inertia[k];
            }
        }
        e
    }
}

/// Marks which execution context holds the authoritative copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Owner {
    #[default]
    Unassigned,
    Worker(u32),
    Halo,
}

/// Dynamic state of one rigid molecule. `v` and `j` live at the half step
/// `t - dt/2`; `j` is the world-frame angular momentum.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeState {
    pub id: u64,
    pub species: usize,
    pub r: Vec3,
    pub v: Vec3,
    pub q: Quat,
    pub j: Vec3,
    pub owner: Owner,
}

impl MoleculeState {
    pub fn at_rest(id: u64, species: usize, r: Vec3) -> Self {
        MoleculeState { id, species, r, v: Vec3::ZERO, q: Quat::IDENTITY, j: Vec3::ZERO, owner: Owner::Unassigned }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ensemble {
    Nve,
    Nvt,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LongRange {
    None,
    LjTail,
    /// Dispersion tail plus reaction field; `f64::INFINITY` is a conducting
    /// boundary.
    LjTailReactionField(f64),
}

/// Which form of the Lennard-Jones site-site term is used inside the cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LjForm {
    /// Plain truncation at rc.
    Truncated,
    /// Truncated and shifted so the energy vanishes at rc.
    TruncatedShifted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisPolicy {
    Alternate,
    Longest,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub box_len: Vec3,
    pub cutoff: f64,
    pub dt: f64,
    pub n_steps: u64,
    pub ensemble: Ensemble,
    pub target_temperature: f64,
    pub thermostat_interval: u64,
    pub rebalance_interval: u64,
    /// Occupancy above which a cell is split into 2x2x2 subcells.
    pub adaptive_threshold: Option<usize>,
    pub workers: usize,
    pub seed: u64,
    pub species: Vec<Species>,
    /// Binary interaction parameters keyed by species pair; missing pairs use 1.
    pub eta: Vec<((usize, usize), f64)>,
    pub lj_form: LjForm,
    pub long_range: LongRange,
    pub axis_policy: AxisPolicy,
}

impl SimConfig {
    pub fn lj(box_len: Vec3, cutoff: f64, dt: f64) -> Self {
        SimConfig {
            box_len,
            cutoff,
            dt,
            n_steps: 0,
            ensemble: Ensemble::Nve,
            target_temperature: 1.0,
            thermostat_interval: 1,
            rebalance_interval: 100,
            adaptive_threshold: None,
            workers: 1,
            seed: 0,
            species: vec![Species::lj_atom(0, 1.0, 1.0, 1.0).expect("valid LJ atom")],
            eta: vec![],
            lj_form: LjForm::TruncatedShifted,
            long_range: LongRange::None,
            axis_policy: AxisPolicy::Alternate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0) {
            return Err(Error::InvalidInput("cutoff must be positive".into()));
        }
        for k in 0..3 {
            if !(self.box_len[k] > 2.0 * self.cutoff) {
                return Err(Error::BoxTooSmall { axis: k, length: self.box_len[k], cutoff: self.cutoff });
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput("time step must be positive".into()));
        }
        if self.workers < 1 {
            return Err(Error::InvalidInput("need at least one worker".into()));
        }
        if self.thermostat_interval == 0 || self.rebalance_interval == 0 {
            return Err(Error::InvalidInput("intervals must be at least 1".into()));
        }
        if self.ensemble == Ensemble::Nvt && !(self.target_temperature > 0.0) {
            return Err(Error::InvalidInput("NVT needs a positive target temperature".into()));
        }
        if let LongRange::LjTailReactionField(eps) = self.long_range {
            if !(eps >= 1.0) {
                return Err(Error::InvalidInput(format!("reaction-field permittivity {eps} < 1")));
            }
        }
        for (i, s) in self.species.iter().enumerate() {
            if s.id != i {
                return Err(Error::InvalidInput(format!("species ids must be 0..n, found {} at {i}", s.id)));
            }
        }
        if self.species.is_empty() {
            return Err(Error::InvalidInput("no species defined".into()));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.box_len.x * self.box_len.y * self.box_len.z
    }

    pub fn eta(&self, a: usize, b: usize) -> f64 {
        self.eta.iter().find(|((x, y), _)| (*x == a && *y == b) || (*x == b && *y == a)).map_or(1.0, |(_, e)| *e)
    }
}

/// Translational plus rotational kinetic energy of the stored velocities.
pub fn kinetic_energy(states: &[MoleculeState], species: &[Species]) -> f64 {
    states
        .iter()
        .map(|s| {
            let sp = &species[s.species];
            let mut e = 0.5 * sp.mass * s.v.norm2();
            if !sp.is_symmetric() {
                e += sp.rotational_energy(s.q.rotate_inv(s.j));
            }
            e
        })
        .sum()
}

/// Degrees of freedom: three translational per molecule plus the rotor's.
pub fn degrees_of_freedom(states: &[MoleculeState], species: &[Species]) -> usize {
    states.iter().map(|s| 3 + species[s.species].rotor().degrees_of_freedom()).sum()
}

/// `2 E_kin / N_dof` with k_B = 1.
pub fn instantaneous_temperature(states: &[MoleculeState], species: &[Species]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::UndefinedTemperature);
    }
    let dof = degrees_of_freedom(states, species) as f64;
    Ok(2.0 * kinetic_energy(states, species) / dof)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_v(v: Vec3) -> String {
    format!("{} {} {}", fmt_f(v.x), fmt_f(v.y), fmt_f(v.z))
}

/// Writes a checkpoint: header with box, step and species table, then one
/// line per molecule `id species rx ry rz vx vy vz qw qx qy qz jx jy jz`.
pub fn write_checkpoint(
    mut out: impl Write,
    box_len: Vec3,
    step: u64,
    species: &[Species],
    states: &[MoleculeState],
) -> Result<()> {
    let mut h = String::new();
    writeln!(h, "# cellmd checkpoint (internal units, j in world frame)").unwrap();
    writeln!(h, "box {}", fmt_v(box_len)).unwrap();
    writeln!(h, "step {step}").unwrap();
    writeln!(h, "species {}", species.len()).unwrap();
    for s in species {
        writeln!(
            h,
            "species_def {} {} {} {} {} {} {} {}",
            s.id,
            s.name,
            fmt_f(s.mass),
            fmt_v(s.inertia),
            s.lj_sites.len(),
            s.charges.len(),
            s.dipoles.len(),
            s.quadrupoles.len()
        )
        .unwrap();
        for l in &s.lj_sites {
            writeln!(h, "lj {} {} {}", fmt_v(l.pos), fmt_f(l.sigma), fmt_f(l.epsilon)).unwrap();
        }
        for c in &s.charges {
            writeln!(h, "charge {} {}", fmt_v(c.pos), fmt_f(c.q)).unwrap();
        }
        for d in &s.dipoles {
            writeln!(h, "dipole {} {} {}", fmt_v(d.pos), fmt_v(d.axis), fmt_f(d.mu)).unwrap();
        }
        for q in &s.quadrupoles {
            writeln!(h, "quadrupole {} {} {}", fmt_v(q.pos), fmt_v(q.axis), fmt_f(q.q)).unwrap();
        }
    }
    writeln!(h, "molecules {}", states.len()).unwrap();
    out.write_all(h.as_bytes())?;
    for m in states {
        writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            m.id,
            m.species,
            fmt_f(m.r.x),
            fmt_f(m.r.y),
            fmt_f(m.r.z),
            fmt_f(m.v.x),
            fmt_f(m.v.y),
            fmt_f(m.v.z),
            fmt_f(m.q.w),
            fmt_f(m.q.x),
            fmt_f(m.q.y),
            fmt_f(m.q.z),
            fmt_f(m.j.x),
            fmt_f(m.j.y),
            fmt_f(m.j.z),
        )?;
    }
    Ok(())
}

pub struct Checkpoint {
    pub box_len: Vec3,
    pub step: u64,
    pub species: Vec<Species>,
    pub states: Vec<MoleculeState>,
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_fields(&mut self) -> Result<Vec<String>> {
        loop {
            let Some(l) = self.inner.next() else {
                return Err(Error::Parse { line: self.line + 1, msg: "unexpected end of file".into() });
            };
            let l = l?;
            self.line += 1;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(t.split_whitespace().map(str::to_string).collect());
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }

    fn nums(&self, f: &[String]) -> Result<Vec<f64>> {
        f.iter().map(|s| s.parse::<f64>().map_err(|_| self.err(format!("bad number `{s}`")))).collect()
    }

    fn expect_nums(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let f = self.expect(key, n)?;
        self.nums(&f)
    }

    fn expect(&mut self, key: &str, n: usize) -> Result<Vec<String>> {
        let f = self.next_fields()?;
        if f[0] != key || f.len() != n + 1 {
            return Err(self.err(format!("expected `{key}` with {n} values")));
        }
        Ok(f[1..].to_vec())
    }
}

fn v3(x: &[f64]) -> Vec3 {
    Vec3::new(x[0], x[1], x[2])
}

pub fn read_checkpoint(input: impl BufRead) -> Result<Checkpoint> {
    let mut r = Lines { inner: input.lines(), line: 0 };
    let f = r.expect("box", 3)?;
    let box_len = v3(&r.nums(&f)?);
    let f = r.expect("step", 1)?;
    let step = f[0].parse().map_err(|_| r.err("bad step"))?;
    let f = r.expect("species", 1)?;
    let n_species: usize = f[0].parse().map_err(|_| r.err("bad species count"))?;
    let mut species = Vec::with_capacity(n_species);
    for _ in 0..n_species {
        let f = r.expect("species_def", 10)?;
        let id: usize = f[0].parse().map_err(|_| r.err("bad species id"))?;
        let name = f[1].clone();
        let nums = r.nums(&f[2..])?;
        let mass = nums[0];
        let inertia = v3(&nums[1..4]);
        let counts: Vec<usize> = nums[4..].iter().map(|&x| x as usize).collect();
        let mut lj = vec![];
        for _ in 0..counts[0] {
            let x = r.expect_nums("lj", 5)?;
            lj.push(LjSite { pos: v3(&x), sigma: x[3], epsilon: x[4] });
        }
        let mut ch = vec![];
        for _ in 0..counts[1] {
            let x = r.expect_nums("charge", 4)?;
            ch.push(ChargeSite { pos: v3(&x), q: x[3] });
        }
        let mut dp = vec![];
        for _ in 0..counts[2] {
            let x = r.expect_nums("dipole", 7)?;
            dp.push(DipoleSite { pos: v3(&x), axis: v3(&x[3..]), mu: x[6] });
        }
        let mut qp = vec![];
        for _ in 0..counts[3] {
            let x = r.expect_nums("quadrupole", 7)?;
            qp.push(QuadrupoleSite { pos: v3(&x), axis: v3(&x[3..]), q: x[6] });
        }
        species.push(Species::new(id, name, lj, ch, dp, qp, mass, inertia)?);
    }
    let f = r.expect("molecules", 1)?;
    let n: usize = f[0].parse().map_err(|_| r.err("bad molecule count"))?;
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let f = r.next_fields()?;
        if f.len() != 15 {
            return Err(r.err("molecule line needs 15 fields"));
        }
        let id = f[0].parse().map_err(|_| r.err("bad molecule id"))?;
        let sp: usize = f[1].parse().map_err(|_| r.err("bad species index"))?;
        if sp >= species.len() {
            return Err(r.err(format!("unknown species {sp}")));
        }
        let x = r.nums(&f[2..])?;
        states.push(MoleculeState {
            id,
            species: sp,
            r: v3(&x),
            v: v3(&x[3..]),
            q: Quat::new(x[6], x[7], x[8], x[9]),
            j: v3(&x[10..]),
            owner: Owner::Unassigned,
        });
    }
    Ok(Checkpoint { box_len, step, species, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atom() -> Vec<Species> {
        vec![Species::lj_atom(0, 1.0, 1.0, 1.0).unwrap()]
    }

    fn linear_species() -> Species {
        Species::new(
            0,
            "dumbbell",
            vec![
                LjSite { pos: Vec3::new(0.0, 0.0, 0.5), sigma: 1.0, epsilon: 1.0 },
                LjSite { pos: Vec3::new(0.0, 0.0, -0.5), sigma: 1.0, epsilon: 1.0 },
            ],
            vec![],
            vec![],
            vec![],
            2.0,
            Vec3::new(0.5, 0.5, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn rotor_classification() {
        assert_eq!(atom()[0].rotor(), Rotor::Symmetric);
        assert_eq!(linear_species().rotor(), Rotor::Linear(2));
        let bad = Species::new(
            0,
            "bent",
            vec![LjSite { pos: Vec3::new(1.0, 0.0, 0.0), sigma: 1.0, epsilon: 1.0 }],
            vec![],
            vec![],
            vec![],
            1.0,
            Vec3::ZERO,
        );
        assert!(matches!(bad, Err(Error::ZeroInertia { .. })));
    }

    #[test]
    fn non_unit_axis_rejected() {
        let s = Species::new(
            0,
            "d",
            vec![],
            vec![],
            vec![DipoleSite { pos: Vec3::ZERO, axis: Vec3::new(0.0, 0.0, 1.0 + 1e-9), mu: 1.0 }],
            vec![],
            1.0,
            Vec3::new(1.0, 1.0, 1.0),
        );
        assert!(matches!(s, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn kinetic_energy_examples() {
        let sp = atom();
        let mut m = MoleculeState::at_rest(0, 0, Vec3::ZERO);
        assert_eq!(kinetic_energy(std::slice::from_ref(&m), &sp), 0.0);
        m.v = Vec3::new(2.0, 0.0, 0.0);
        assert_eq!(kinetic_energy(&[m], &sp), 2.0);
    }

    #[test]
    fn kinetic_energy_matches_direct_sum() {
        let sp = vec![
            Species::lj_atom(0, 1.0, 1.0, 1.7).unwrap(),
            Species::new(
                1,
                "top",
                vec![LjSite { pos: Vec3::new(0.3, 0.1, 0.0), sigma: 1.0, epsilon: 1.0 }],
                vec![],
                vec![],
                vec![],
                2.5,
                Vec3::new(0.4, 0.9, 1.3),
            )
            .unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut states = vec![];
        let mut expect = 0.0;
        for i in 0..10 {
            let s = i % 2;
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let q = Quat::new(rng.random(), rng.random(), rng.random(), rng.random()).normalized();
            let jb = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let m = sp[s].mass;
            expect += 0.5 * m * (v.x * v.x + v.y * v.y + v.z * v.z);
            if s == 1 {
                let i3 = sp[1].inertia;
                expect += 0.5 * (jb.x * jb.x / i3.x + jb.y * jb.y / i3.y + jb.z * jb.z / i3.z);
            }
            states.push(MoleculeState {
                id: i as u64,
                species: s,
                r: Vec3::ZERO,
                v,
                q,
                j: q.rotate(jb),
                owner: Owner::Unassigned,
            });
        }
        let got = kinetic_energy(&states, &sp);
        assert!(((got - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn temperature_examples() {
        let sp = atom();
        assert!(matches!(instantaneous_temperature(&[], &sp), Err(Error::UndefinedTemperature)));
        let m = MoleculeState::at_rest(0, 0, Vec3::ZERO);
        assert_eq!(instantaneous_temperature(&[m], &sp).unwrap(), 0.0);

        // sum m v^2 = 3000 over 1000 particles: v^2 = 3 each.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let states: Vec<_> = (0..1000)
            .map(|i| {
                let d =
                    Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        .normalized();
                let mut m = MoleculeState::at_rest(i, 0, Vec3::ZERO);
                m.v = d * 3f64.sqrt();
                m
            })
            .collect();
        let t = instantaneous_temperature(&states, &sp).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_molecule_has_five_dof() {
        let sp = vec![linear_species()];
        let mut m = MoleculeState::at_rest(0, 0, Vec3::ZERO);
        m.v = Vec3::new(1.0, 0.0, 0.0); // 1.0 translational
        m.j = Vec3::new(0.5, 0.0, 0.0); // 0.25 rotational about body x
        assert_eq!(degrees_of_freedom(&[m.clone()], &sp), 5);
        let t = instantaneous_temperature(&[m], &sp).unwrap();
        assert!((t - 2.0 * 1.25 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let sp = [atom().remove(0), linear_species()];
        let sp = vec![sp[0].clone(), Species { id: 1, ..sp[1].clone() }];
        let states = vec![
            MoleculeState {
                id: 4,
                species: 1,
                r: Vec3::new(0.1, 1.0 / 3.0, 2.0),
                v: Vec3::new(-1e-9, 3.0, 0.5),
                q: Quat::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.3),
                j: Vec3::new(0.2, -0.1, 0.0),
                owner: Owner::Unassigned,
            },
            MoleculeState::at_rest(9, 0, Vec3::new(5.0, 5.0, 5.0)),
        ];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, Vec3::splat(10.0), 42, &sp, &states).unwrap();
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.step, 42);
        assert_eq!(back.box_len, Vec3::splat(10.0));
        assert_eq!(back.species, sp);
        assert_eq!(back.states, states);
    }

    #[test]
    fn checkpoint_reports_line_of_error() {
        let text = "box 1 2 3\nstep x\n";
        match read_checkpoint(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {:?}", other.err()),
        }
    }
}
