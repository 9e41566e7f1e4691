//! One rectangular block of cells with its owned molecules and halo copies.
//!
//! The serial engine runs a single domain covering the whole box; each
//! parallel worker runs one domain per leaf of the decomposition. Both go
//! through exactly the same calls, so a one-worker run reproduces the serial
//! trajectory bit for bit.

use crate::balance::{cell_cost, CellLoad, HaloSnapshot};
use crate::cells::{global_cell, grid_geometry, CellBox, CellGrid, PairTraversalStats};
use crate::error::{Error, Result};
use crate::field::{Accumulator, ForceField, SiteFrames};
use crate::integrate::{drift, kick, scale_momenta, KickMode, Kinetic, StepForces};
use crate::math::Vec3;
use crate::model::{MoleculeState, Owner, Species};

/// Result of one force evaluation over a domain.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForcePass {
    pub potential: f64,
    pub virial: f64,
    pub stats: PairTraversalStats,
    pub clamped: u64,
    /// Estimated distance computations of the owned cells.
    pub cost: f64,
}

/// Image source cells and shifts, in box lengths.
pub type HaloPlan = Vec<([i64; 3], [i64; 3])>;

#[derive(Clone, Debug)]
pub struct Domain {
    box_len: Vec3,
    cutoff: f64,
    dims: [usize; 3],
    edge: Vec3,
    inv_edge: Vec3,
    region: CellBox,
    pub owned: Vec<MoleculeState>,
    halo: Vec<HaloSnapshot>,
    grid: CellGrid,
    frames: SiteFrames,
    positions: Vec<Vec3>,
    forces: StepForces,
}

impl Domain {
    pub fn new(box_len: Vec3, cutoff: f64, region: CellBox) -> Result<Self> {
        let (dims, edge) = grid_geometry(box_len, cutoff)?;
        Ok(Domain {
            box_len,
            cutoff,
            dims,
            edge,
            inv_edge: Vec3::new(1.0 / edge.x, 1.0 / edge.y, 1.0 / edge.z),
            region,
            owned: Vec::new(),
            halo: Vec::new(),
            grid: CellGrid::new(box_len, cutoff, region)?,
            frames: SiteFrames::default(),
            positions: Vec::new(),
            forces: StepForces::default(),
        })
    }

    pub fn region(&self) -> CellBox {
        self.region
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn edge(&self) -> Vec3 {
        self.edge
    }

    pub fn set_region(&mut self, region: CellBox) -> Result<()> {
        if region != self.region {
            self.region = region;
            self.grid = CellGrid::new(self.box_len, self.cutoff, region)?;
        }
        Ok(())
    }

    #[inline]
    pub fn cell_of(&self, r: Vec3) -> [i64; 3] {
        global_cell(r, self.inv_edge, self.dims)
    }

    /// Halo snapshots for each plan, in plan order.
    pub fn halo_exports(&self, plans: &[HaloPlan]) -> Vec<Vec<HaloSnapshot>> {
        let ext = self.region.extents();
        let local = |c: [i64; 3]| {
            let l = [c[0] - self.region.lo[0], c[1] - self.region.lo[1], c[2] - self.region.lo[2]];
            l[0] as usize + ext[0] * (l[1] as usize + ext[1] * l[2] as usize)
        };
        let n_cells = self.region.n_cells();
        let mut start = vec![0usize; n_cells + 1];
        let cells: Vec<usize> = self.owned.iter().map(|m| local(self.cell_of(m.r))).collect();
        for &c in &cells {
            start[c + 1] += 1;
        }
        for c in 0..n_cells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut order = vec![0usize; self.owned.len()];
        for (i, &c) in cells.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        plans
            .iter()
            .map(|plan| {
                let mut out = Vec::new();
                for (src, shift) in plan {
                    let s = Vec3::new(shift[0] as f64, shift[1] as f64, shift[2] as f64).hadamard(self.box_len);
                    let c = local(*src);
                    for &i in &order[start[c]..start[c + 1]] {
                        let m = &self.owned[i];
                        out.push(HaloSnapshot { id: m.id, species: m.species, r: m.r + s, q: m.q });
                    }
                }
                out
            })
            .collect()
    }

    pub fn set_halo(&mut self, halo: Vec<HaloSnapshot>) {
        self.halo = halo;
    }

    pub fn n_halo(&self) -> usize {
        self.halo.len()
    }

    /// Forces and torques on all owned molecules.
    pub fn force_pass(&mut self, ff: &ForceField, adaptive: Option<usize>) -> Result<ForcePass> {
        let n_owned = self.owned.len();
        self.positions.clear();
        self.positions.extend(self.owned.iter().map(|m| m.r));
        self.positions.extend(self.halo.iter().map(|h| h.r));
        self.grid.bin(&self.positions, n_owned);
        if let Some(t) = adaptive {
            self.grid.refine(t);
        }
        self.frames
            .rebuild(ff, self.owned.iter().map(|m| (m.species, m.q)).chain(self.halo.iter().map(|h| (h.species, h.q))));
        let total = self.positions.len();
        self.forces.force.resize(total, Vec3::ZERO);
        self.forces.torque.resize(total, Vec3::ZERO);
        let mut acc = Accumulator::new(ff, &self.frames, &mut self.forces.force, &mut self.forces.torque);
        let stats = self.grid.for_each_pair(&mut acc);
        if let Some(e) = acc.error.take() {
            return Err(e);
        }
        let (potential, virial, clamped) = (acc.potential, acc.virial, acc.clamped);
        if clamped > 0 {
            log::warn!("{clamped} site pairs closer than the overlap limit were clamped");
        }
        for (m, f) in self.owned.iter().zip(&self.forces.force) {
            if !f.is_finite() {
                return Err(Error::Instability { id: m.id, reason: "non-finite force".into() });
            }
        }
        let cost = self.cell_loads().iter().map(|c| c.cost).sum();
        Ok(ForcePass { potential, virial, stats, clamped, cost })
    }

    /// Occupancy and cost of every owned cell after the last force pass.
    pub fn cell_loads(&self) -> Vec<CellLoad> {
        self.grid
            .neighbor_counts()
            .into_iter()
            .map(|(cell, n, nb)| CellLoad { cell, count: n, cost: cell_cost(n, &[nb]) })
            .collect()
    }

    pub fn kick(&mut self, species: &[Species], h: f64, mode: KickMode) -> Kinetic {
        kick(&mut self.owned, &self.forces, species, h, mode)
    }

    pub fn scale(&mut self, lambda: f64) {
        if lambda != 1.0 {
            scale_momenta(&mut self.owned, lambda);
        }
    }

    pub fn drift(&mut self, species: &[Species], dt: f64) -> Result<()> {
        drift(&mut self.owned, species, dt, self.box_len, self.edge)
    }

    /// Removes molecules owned by other workers, grouped by destination.
    pub fn emigrants(
        &mut self,
        me: usize,
        n_workers: usize,
        owner_of: impl Fn([i64; 3]) -> usize,
    ) -> Vec<Vec<MoleculeState>> {
        let mut out = vec![Vec::new(); n_workers];
        let mut keep = Vec::with_capacity(self.owned.len());
        for m in self.owned.drain(..) {
            let w = owner_of(global_cell(m.r, self.inv_edge, self.dims));
            if w == me {
                keep.push(m);
            } else {
                out[w].push(m);
            }
        }
        self.owned = keep;
        out
    }

    pub fn accept(&mut self, me: usize, migrants: Vec<MoleculeState>) {
        self.owned.extend(migrants.into_iter().map(|mut m| {
            m.owner = Owner::Worker(me as u32);
            m
        }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::halo_sources;
    use crate::model::SimConfig;

    #[test]
    fn self_halo_feeds_periodic_images() {
        let l = Vec3::splat(10.0);
        let mut d = Domain::new(l, 2.5, CellBox::whole([4, 4, 4])).unwrap();
        d.owned = vec![
            MoleculeState::at_rest(0, 0, Vec3::new(0.5, 0.5, 0.5)),
            MoleculeState::at_rest(1, 0, Vec3::new(9.7, 0.5, 0.5)),
        ];
        let plan = halo_sources([4, 4, 4], &d.region(), &d.region());
        let h = d.halo_exports(&[plan]).pop().unwrap();
        // Both sit in corner cells, so each has seven images.
        assert_eq!(h.iter().filter(|s| s.id == 0).count(), 7);
        assert_eq!(h.iter().filter(|s| s.id == 1).count(), 7);
        d.set_halo(h);
        let cfg = SimConfig::lj(l, 2.5, 0.001);
        let ff = ForceField::new(&cfg).unwrap();
        let pass = d.force_pass(&ff, None).unwrap();
        // The two are 0.8 apart through the x boundary; the pair is seen once
        // from each side at half weight.
        assert_eq!(pass.stats.pairs_within_cutoff, 2);
        let expect = crate::potentials::ljts_pair(1.0, 1.0, Vec3::new(0.8, 0.0, 0.0), 2.5).unwrap();
        assert!((pass.potential - expect.u).abs() < 1e-12);
    }
}
