//! Molecule-pair interactions assembled from the site-site kernels.
//!
//! The cutoff acts on center-of-mass distance: once two molecules are closer
//! than `rc`, every site pair between them is evaluated. Forces act on the
//! centers of mass; the lever arms of off-center sites produce torques.

use crate::cells::{PairMode, PairVisitor};
use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};
use crate::model::{LongRange, SimConfig, Species};
use crate::potentials::{
    electrostatic_pair, lj_from_r2, lj_tail_correction, reaction_field_factor, reaction_field_self_energy, MixingTable,
    PolarSite, Polarity,
};

/// Site separations below this fraction of the mixed size are clamped.
pub const OVERLAP_FRACTION: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ForceField {
    species: Vec<Species>,
    mixing: MixingTable,
    cutoff: f64,
    long_range: LongRange,
    rf_factor: f64,
}

impl ForceField {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let mixing = MixingTable::new(&cfg.species, |a, b| cfg.eta(a, b), cfg.lj_form, cfg.cutoff)?;
        let rf_factor = match cfg.long_range {
            LongRange::LjTailReactionField(eps) => reaction_field_factor(eps)?,
            _ => 0.0,
        };
        Ok(ForceField {
            species: cfg.species.clone(),
            mixing,
            cutoff: cfg.cutoff,
            long_range: cfg.long_range,
            rf_factor,
        })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Energy and pressure added for interactions beyond the cutoff, for a
    /// homogeneous system with `counts[s]` molecules of species `s`.
    pub fn corrections(&self, counts: &[usize], volume: f64) -> Result<(f64, f64)> {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Ok((0.0, 0.0));
        }
        let mut energy = 0.0;
        let mut pressure = 0.0;
        if self.long_range != LongRange::None {
            let rho = n as f64 / volume;
            for a in 0..self.species.len() {
                for b in 0..self.species.len() {
                    let x = counts[a] as f64 * counts[b] as f64 / (n as f64 * n as f64);
                    if x == 0.0 {
                        continue;
                    }
                    for p in self.mixing.get(a, b) {
                        let t = lj_tail_correction(rho, p.sigma, p.epsilon, self.cutoff, n);
                        energy += x * t.energy;
                        pressure += x * t.pressure;
                    }
                }
            }
        }
        if let LongRange::LjTailReactionField(eps) = self.long_range {
            for (s, &c) in self.species.iter().zip(counts) {
                for d in &s.dipoles {
                    energy += c as f64 * reaction_field_self_energy(d.mu, eps, self.cutoff)?;
                }
            }
        }
        Ok((energy, pressure))
    }
}

/// World-frame site geometry of every molecule in a domain.
#[derive(Clone, Debug, Default)]
pub struct SiteFrames {
    species: Vec<u32>,
    lj_start: Vec<u32>,
    lj: Vec<Vec3>,
    pol_start: Vec<u32>,
    pol: Vec<(Vec3, PolarSite)>,
}

impl SiteFrames {
    pub fn rebuild<'a>(&mut self, ff: &ForceField, molecules: impl Iterator<Item = (usize, Quat)> + 'a) {
        self.species.clear();
        self.lj_start.clear();
        self.lj.clear();
        self.pol_start.clear();
        self.pol.clear();
        self.lj_start.push(0);
        self.pol_start.push(0);
        for (s, q) in molecules {
            let sp = &ff.species[s];
            self.species.push(s as u32);
            if sp.is_symmetric() {
                self.lj.extend(sp.lj_sites.iter().map(|l| l.pos));
            } else {
                self.lj.extend(sp.lj_sites.iter().map(|l| q.rotate(l.pos)));
            }
            for c in &sp.charges {
                self.pol
                    .push((q.rotate(c.pos), PolarSite { kind: Polarity::Charge(c.q), axis: Vec3::new(0.0, 0.0, 1.0) }));
            }
            for d in &sp.dipoles {
                self.pol.push((q.rotate(d.pos), PolarSite { kind: Polarity::Dipole(d.mu), axis: q.rotate(d.axis) }));
            }
            for d in &sp.quadrupoles {
                self.pol.push((q.rotate(d.pos), PolarSite { kind: Polarity::Quadrupole(d.q), axis: q.rotate(d.axis) }));
            }
            self.lj_start.push(self.lj.len() as u32);
            self.pol_start.push(self.pol.len() as u32);
        }
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    #[inline]
    fn lj_of(&self, i: usize) -> &[Vec3] {
        &self.lj[self.lj_start[i] as usize..self.lj_start[i + 1] as usize]
    }

    #[inline]
    fn pol_of(&self, i: usize) -> &[(Vec3, PolarSite)] {
        &self.pol[self.pol_start[i] as usize..self.pol_start[i + 1] as usize]
    }
}

/// Accumulates forces, torques, energy and virial over visited pairs.
/// Pairs with only one local partner contribute half their energy and virial.
pub struct Accumulator<'a> {
    ff: &'a ForceField,
    frames: &'a SiteFrames,
    pub forces: &'a mut [Vec3],
    pub torques: &'a mut [Vec3],
    pub potential: f64,
    pub virial: f64,
    pub clamped: u64,
    pub error: Option<Error>,
}

impl<'a> Accumulator<'a> {
    pub fn new(ff: &'a ForceField, frames: &'a SiteFrames, forces: &'a mut [Vec3], torques: &'a mut [Vec3]) -> Self {
        forces.iter_mut().for_each(|f| *f = Vec3::ZERO);
        torques.iter_mut().for_each(|t| *t = Vec3::ZERO);
        Accumulator { ff, frames, forces, torques, potential: 0.0, virial: 0.0, clamped: 0, error: None }
    }
}

/// Sum of one molecule pair, force and torques on `i` and torque on `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MoleculePair {
    pub u: f64,
    pub virial: f64,
    pub f_i: Vec3,
    pub tau_i: Vec3,
    pub tau_j: Vec3,
    pub clamped: u64,
}

/// Every site-site term between molecules `i` and `j` with COM separation
/// `r_ij = r_i - r_j`.
pub fn molecule_pair(ff: &ForceField, frames: &SiteFrames, i: usize, j: usize, r_ij: Vec3) -> Result<MoleculePair> {
    let (si, sj) = (frames.species[i] as usize, frames.species[j] as usize);
    let params = ff.mixing.get(si, sj);
    let (li, lj) = (frames.lj_of(i), frames.lj_of(j));
    let mut out = MoleculePair::default();
    let nb = lj.len();
    for (a, &oa) in li.iter().enumerate() {
        for (b, &ob) in lj.iter().enumerate() {
            let p = &params[a * nb + b];
            if p.epsilon == 0.0 {
                continue;
            }
            let mut d = r_ij + oa - ob;
            let mut d2 = d.norm2();
            let min2 = (OVERLAP_FRACTION * p.sigma).powi(2);
            if d2 < min2 {
                if d2 == 0.0 {
                    return Err(Error::SingularOverlap);
                }
                d = d * (min2 / d2).sqrt();
                d2 = min2;
                out.clamped += 1;
            }
            let pr = lj_from_r2(p.sigma2, p.epsilon, d, d2);
            out.u += pr.u - p.shift;
            out.virial += pr.virial;
            out.f_i += pr.f;
            out.tau_i += oa.cross(pr.f);
            out.tau_j -= ob.cross(pr.f);
        }
    }
    let (pi, pj) = (frames.pol_of(i), frames.pol_of(j));
    if pi.is_empty() || pj.is_empty() {
        return Ok(out);
    }
    let rf = ff.rf_factor / ff.cutoff.powi(3);
    for (oa, sa) in pi {
        for (ob, sb) in pj {
            let d = r_ij + *oa - *ob;
            let e = electrostatic_pair(sa, sb, d)?;
            out.u += e.pair.u;
            out.virial += e.pair.virial;
            out.f_i += e.pair.f;
            out.tau_i += oa.cross(e.pair.f) + e.torque_a;
            out.tau_j += e.torque_b - ob.cross(e.pair.f);
            if rf != 0.0 {
                if let (Polarity::Dipole(ma), Polarity::Dipole(mb)) = (sa.kind, sb.kind) {
                    let pre = rf * ma * mb;
                    out.u -= pre * sa.axis.dot(sb.axis);
                    let t = sa.axis.cross(sb.axis) * pre;
                    out.tau_i += t;
                    out.tau_j -= t;
                }
            }
        }
    }
    Ok(out)
}

impl PairVisitor for Accumulator<'_> {
    #[inline]
    fn visit(&mut self, i: usize, j: usize, r_ij: Vec3, _r2: f64, mode: PairMode) {
        let p = match molecule_pair(self.ff, self.frames, i, j, r_ij) {
            Ok(p) => p,
            Err(e) => {
                self.error.get_or_insert(e);
                return;
            }
        };
        self.clamped += p.clamped;
        match mode {
            PairMode::Both => {
                self.forces[i] += p.f_i;
                self.forces[j] -= p.f_i;
                self.torques[i] += p.tau_i;
                self.torques[j] += p.tau_j;
                self.potential += p.u;
                self.virial += p.virial;
            }
            PairMode::FirstOnly => {
                self.forces[i] += p.f_i;
                self.torques[i] += p.tau_i;
                self.potential += 0.5 * p.u;
                self.virial += 0.5 * p.virial;
            }
            PairMode::SecondOnly => {
                self.forces[j] -= p.f_i;
                self.torques[j] += p.tau_j;
                self.potential += 0.5 * p.u;
                self.virial += 0.5 * p.virial;
            }
        }
    }
}
