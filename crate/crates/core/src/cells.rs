//! Linked-cell neighbor search.
//!
//! The periodic box is divided into `floor(L/rc)` cells per axis, so every
//! cell edge is at least `rc`. A grid covers one rectangular block of those
//! global cells (the owned region) plus a one-cell halo layer holding
//! read-only periodic or remote copies. Molecules are stored cell-sorted.
//!
//! Pairs are enumerated with a half stencil: every cell is paired with itself
//! and with its 13 forward neighbors. A cell pair is visited when at least
//! one of the two cells is owned, so an owned-halo pair is seen exactly once
//! by each domain that owns one of its members.
//!
//! Dense cells can optionally be split into 2x2x2 subcells of edge `>= rc/2`.
//! Subcell pairs whose index distance along any axis is 3 or more (measured
//! on the doubled grid) are provably farther apart than `rc` and are skipped,
//! which shrinks the scanned volume from 27 rc^3 towards 15.6 rc^3.

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Inclusive block of global cell indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellBox {
    pub lo: [i64; 3],
    pub hi: [i64; 3],
}

impl CellBox {
    pub fn whole(dims: [usize; 3]) -> Self {
        CellBox { lo: [0; 3], hi: [dims[0] as i64 - 1, dims[1] as i64 - 1, dims[2] as i64 - 1] }
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn extents(&self) -> [usize; 3] {
        [self.extent(0), self.extent(1), self.extent(2)]
    }

    pub fn n_cells(&self) -> usize {
        self.extent(0) * self.extent(1) * self.extent(2)
    }

    pub fn contains(&self, c: [i64; 3]) -> bool {
        (0..3).all(|k| c[k] >= self.lo[k] && c[k] <= self.hi[k])
    }

    /// All cells in x-fastest order.
    pub fn cells(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        let [lx, ly, lz] = self.lo;
        let [hx, hy, hz] = self.hi;
        (lz..=hz).flat_map(move |z| (ly..=hy).flat_map(move |y| (lx..=hx).map(move |x| [x, y, z])))
    }
}

/// Cells per axis and cell edge for a periodic box.
pub fn grid_geometry(box_len: Vec3, cutoff: f64) -> Result<([usize; 3], Vec3)> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidInput("cutoff must be positive".into()));
    }
    let mut dims = [0usize; 3];
    let mut edge = Vec3::ZERO;
    for k in 0..3 {
        let n = (box_len[k] / cutoff).floor();
        if !(n >= 2.0) || !(box_len[k] >= 2.0 * cutoff) {
            return Err(Error::BoxTooSmall { axis: k, length: box_len[k], cutoff });
        }
        dims[k] = n as usize;
        edge[k] = box_len[k] / n;
    }
    Ok((dims, edge))
}

/// Global cell of a position inside `[0, L)`, clamped onto the grid.
#[inline]
pub fn global_cell(r: Vec3, inv_edge: Vec3, dims: [usize; 3]) -> [i64; 3] {
    let mut c = [0i64; 3];
    for k in 0..3 {
        let i = (r[k] * inv_edge[k]).floor() as i64;
        c[k] = i.clamp(0, dims[k] as i64 - 1);
    }
    c
}

/// Periodic wrap into `[0, L)`.
#[inline]
pub fn wrap_position(mut r: Vec3, box_len: Vec3) -> Vec3 {
    for k in 0..3 {
        let l = box_len[k];
        if r[k] < 0.0 || r[k] >= l {
            r[k] = r[k].rem_euclid(l);
            if r[k] >= l {
                r[k] = 0.0;
            }
        }
    }
    r
}

/// Source cells and image shifts that fill the halo shell of `dest` from the
/// cells owned by `src`. Shifts are in units of the box length. The order is
/// deterministic (shell cells in x-fastest order).
pub fn halo_sources(dims: [usize; 3], dest: &CellBox, src: &CellBox) -> Vec<([i64; 3], [i64; 3])> {
    let outer = CellBox {
        lo: [dest.lo[0] - 1, dest.lo[1] - 1, dest.lo[2] - 1],
        hi: [dest.hi[0] + 1, dest.hi[1] + 1, dest.hi[2] + 1],
    };
    let mut out = Vec::new();
    for g in outer.cells() {
        if dest.contains(g) {
            continue;
        }
        let mut w = [0i64; 3];
        let mut s = [0i64; 3];
        for k in 0..3 {
            let n = dims[k] as i64;
            w[k] = g[k].rem_euclid(n);
            s[k] = (g[k] - w[k]) / n;
        }
        if src.contains(w) {
            out.push((w, s));
        }
    }
    out
}

/// Counters for the neighbor search hit rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairTraversalStats {
    pub distances_computed: u64,
    pub pairs_within_cutoff: u64,
}

impl PairTraversalStats {
    pub fn hit_rate(&self) -> f64 {
        if self.distances_computed == 0 {
            0.0
        } else {
            self.pairs_within_cutoff as f64 / self.distances_computed as f64
        }
    }

    pub fn merge(&mut self, o: PairTraversalStats) {
        self.distances_computed += o.distances_computed;
        self.pairs_within_cutoff += o.pairs_within_cutoff;
    }
}

/// Which partners of a visited pair belong to the calling domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairMode {
    Both,
    FirstOnly,
    SecondOnly,
}

/// Receives every molecule pair closer than the cutoff. `r_ij = r_i - r_j`.
pub trait PairVisitor {
    fn visit(&mut self, i: usize, j: usize, r_ij: Vec3, r2: f64, mode: PairMode);
}

impl<F: FnMut(usize, usize, Vec3, f64, PairMode)> PairVisitor for F {
    fn visit(&mut self, i: usize, j: usize, r_ij: Vec3, r2: f64, mode: PairMode) {
        self(i, j, r_ij, r2, mode)
    }
}

/// Zero offset first, then the 13 forward neighbors.
const STENCIL: [[i64; 3]; 14] = {
    let mut s = [[0i64; 3]; 14];
    let mut n = 1;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                let forward = dz > 0 || (dz == 0 && (dy > 0 || (dy == 0 && dx > 0)));
                if forward {
                    s[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    s
};

const NO_SUB: u32 = u32::MAX;

/// One contiguous run of cell-sorted molecules plus its extent on the
/// doubled (subcell) grid.
#[derive(Clone, Copy)]
struct Unit {
    start: u32,
    end: u32,
    lo: [i64; 3],
    hi: [i64; 3],
}

#[derive(Clone, Debug)]
pub struct CellGrid {
    global_dims: [usize; 3],
    edge: Vec3,
    inv_edge: Vec3,
    cutoff2: f64,
    region: CellBox,
    ext: [usize; 3],
    n_owned: usize,
    /// Prefix offsets into `order`, one per extended cell plus one.
    starts: Vec<u32>,
    /// Local molecule indices, cell-sorted.
    order: Vec<u32>,
    /// Positions in `order` sequence.
    sorted: Vec<Vec3>,
    /// Per extended cell: index into `sub_starts` or `NO_SUB`.
    sub: Vec<u32>,
    sub_starts: Vec<[u32; 9]>,
}

impl CellGrid {
    /// An empty grid for the owned block `region` of the global cell grid.
    pub fn new(box_len: Vec3, cutoff: f64, region: CellBox) -> Result<Self> {
        let (global_dims, edge) = grid_geometry(box_len, cutoff)?;
        for k in 0..3 {
            if region.lo[k] < 0 || region.hi[k] >= global_dims[k] as i64 || region.lo[k] > region.hi[k] {
                return Err(Error::InvalidInput(format!("region {region:?} outside grid {global_dims:?}")));
            }
        }
        let ext = [region.extent(0) + 2, region.extent(1) + 2, region.extent(2) + 2];
        let n = ext[0] * ext[1] * ext[2];
        Ok(CellGrid {
            global_dims,
            edge,
            inv_edge: Vec3::new(1.0 / edge.x, 1.0 / edge.y, 1.0 / edge.z),
            cutoff2: cutoff * cutoff,
            region,
            ext,
            n_owned: 0,
            starts: vec![0; n + 1],
            order: Vec::new(),
            sorted: Vec::new(),
            sub: vec![NO_SUB; n],
            sub_starts: Vec::new(),
        })
    }

    pub fn global_dims(&self) -> [usize; 3] {
        self.global_dims
    }

    pub fn dims(&self) -> [usize; 3] {
        self.region.extents()
    }

    pub fn region(&self) -> CellBox {
        self.region
    }

    pub fn edge(&self) -> Vec3 {
        self.edge
    }

    pub fn inv_edge(&self) -> Vec3 {
        self.inv_edge
    }

    pub fn n_cells_extended(&self) -> usize {
        self.ext[0] * self.ext[1] * self.ext[2]
    }

    #[inline]
    fn linear(&self, c: [i64; 3]) -> usize {
        (c[0] as usize) + self.ext[0] * ((c[1] as usize) + self.ext[1] * (c[2] as usize))
    }

    #[inline]
    fn coords(&self, idx: usize) -> [i64; 3] {
        let x = idx % self.ext[0];
        let y = (idx / self.ext[0]) % self.ext[1];
        let z = idx / (self.ext[0] * self.ext[1]);
        [x as i64, y as i64, z as i64]
    }

    #[inline]
    fn in_ext(&self, c: [i64; 3]) -> bool {
        (0..3).all(|k| c[k] >= 0 && c[k] < self.ext[k] as i64)
    }

    /// Whether an extended-grid cell belongs to the owned block.
    #[inline]
    pub fn is_owned_cell(&self, c: [i64; 3]) -> bool {
        (0..3).all(|k| c[k] >= 1 && c[k] <= self.region.extent(k) as i64)
    }

    /// Extended-grid coordinates of a global cell (may lie in the halo).
    pub fn local_of_global(&self, g: [i64; 3]) -> [i64; 3] {
        [g[0] - self.region.lo[0] + 1, g[1] - self.region.lo[1] + 1, g[2] - self.region.lo[2] + 1]
    }

    pub fn global_of_local(&self, c: [i64; 3]) -> [i64; 3] {
        [c[0] + self.region.lo[0] - 1, c[1] + self.region.lo[1] - 1, c[2] + self.region.lo[2] - 1]
    }

    #[inline]
    fn local_cell_of(&self, r: Vec3, owned: bool) -> [i64; 3] {
        let mut c = [0i64; 3];
        for k in 0..3 {
            let g = (r[k] * self.inv_edge[k]).floor() as i64;
            let l = g - self.region.lo[k] + 1;
            c[k] = if owned { l.clamp(1, self.region.extent(k) as i64) } else { l.clamp(0, self.ext[k] as i64 - 1) };
        }
        c
    }

    /// Bins molecules. The first `n_owned` positions are owned molecules and
    /// are kept inside the owned block; the rest are halo copies.
    pub fn bin(&mut self, positions: &[Vec3], n_owned: usize) {
        let n_cells = self.n_cells_extended();
        self.n_owned = n_owned;
        let mut cell_of = Vec::with_capacity(positions.len());
        let mut counts = vec![0u32; n_cells + 1];
        for (i, &r) in positions.iter().enumerate() {
            let c = self.linear(self.local_cell_of(r, i < n_owned));
            cell_of.push(c as u32);
            counts[c + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        self.starts.clear();
        self.starts.extend_from_slice(&counts);
        let mut fill = counts;
        self.order.clear();
        self.order.resize(positions.len(), 0);
        for (i, &c) in cell_of.iter().enumerate() {
            let slot = &mut fill[c as usize];
            self.order[*slot as usize] = i as u32;
            *slot += 1;
        }
        self.sorted.clear();
        self.sorted.extend(self.order.iter().map(|&i| positions[i as usize]));
        self.sub.iter_mut().for_each(|s| *s = NO_SUB);
        self.sub_starts.clear();
    }

    pub fn occupancy(&self, c: [i64; 3]) -> usize {
        let i = self.linear(c);
        (self.starts[i + 1] - self.starts[i]) as usize
    }

    /// Local molecule indices in an extended-grid cell.
    pub fn members(&self, c: [i64; 3]) -> &[u32] {
        let i = self.linear(c);
        &self.order[self.starts[i] as usize..self.starts[i + 1] as usize]
    }

    pub fn is_refined(&self, c: [i64; 3]) -> bool {
        self.sub[self.linear(c)] != NO_SUB
    }

    /// Members of the eight subcells of a refined cell; subcell `s` has
    /// offsets `(s & 1, (s >> 1) & 1, (s >> 2) & 1)`.
    pub fn subcell_members(&self, c: [i64; 3]) -> Option<[&[u32]; 8]> {
        let s = self.sub[self.linear(c)];
        if s == NO_SUB {
            return None;
        }
        let b = &self.sub_starts[s as usize];
        Some(std::array::from_fn(|k| &self.order[b[k] as usize..b[k + 1] as usize]))
    }

    pub fn n_refined(&self) -> usize {
        self.sub_starts.len()
    }

    /// Splits every cell holding more than `threshold` molecules into 2x2x2
    /// subcells.
    pub fn refine(&mut self, threshold: usize) {
        let half = self.edge * 0.5;
        for idx in 0..self.n_cells_extended() {
            let (s, e) = (self.starts[idx] as usize, self.starts[idx + 1] as usize);
            if e - s <= threshold {
                continue;
            }
            let g = self.global_of_local(self.coords(idx));
            let origin = Vec3::new(g[0] as f64 * self.edge.x, g[1] as f64 * self.edge.y, g[2] as f64 * self.edge.z);
            let mut keyed: Vec<(u8, u32, Vec3)> = (s..e)
                .map(|k| {
                    let r = self.sorted[k] - origin;
                    let mut key = 0u8;
                    for a in 0..3 {
                        if r[a] >= half[a] {
                            key |= 1 << a;
                        }
                    }
                    (key, self.order[k], self.sorted[k])
                })
                .collect();
            keyed.sort_by_key(|t| t.0);
            let mut bounds = [e as u32; 9];
            bounds[0] = s as u32;
            let mut cursor = 0usize;
            for sc in 0..8u8 {
                bounds[sc as usize] = (s + cursor) as u32;
                while cursor < keyed.len() && keyed[cursor].0 == sc {
                    cursor += 1;
                }
            }
            bounds[8] = e as u32;
            for (k, (_, i, r)) in keyed.into_iter().enumerate() {
                self.order[s + k] = i;
                self.sorted[s + k] = r;
            }
            self.sub[idx] = self.sub_starts.len() as u32;
            self.sub_starts.push(bounds);
        }
    }

    fn units(&self, idx: usize, out: &mut [Unit; 8]) -> usize {
        let c = self.coords(idx);
        let s = self.sub[idx];
        if s == NO_SUB {
            out[0] = Unit {
                start: self.starts[idx],
                end: self.starts[idx + 1],
                lo: [2 * c[0], 2 * c[1], 2 * c[2]],
                hi: [2 * c[0] + 1, 2 * c[1] + 1, 2 * c[2] + 1],
            };
            return 1;
        }
        let b = &self.sub_starts[s as usize];
        for k in 0..8 {
            let f = [2 * c[0] + (k & 1) as i64, 2 * c[1] + ((k >> 1) & 1) as i64, 2 * c[2] + ((k >> 2) & 1) as i64];
            out[k] = Unit { start: b[k], end: b[k + 1], lo: f, hi: f };
        }
        8
    }

    /// Visits every pair closer than the cutoff that involves at least one
    /// owned molecule.
    pub fn for_each_pair(&self, visitor: &mut impl PairVisitor) -> PairTraversalStats {
        let mut stats = PairTraversalStats::default();
        let mut ua = [Unit { start: 0, end: 0, lo: [0; 3], hi: [0; 3] }; 8];
        let mut ub = ua;
        for idx in 0..self.n_cells_extended() {
            if self.starts[idx] == self.starts[idx + 1] {
                continue;
            }
            let c = self.coords(idx);
            let owned_c = self.is_owned_cell(c);
            for (k, off) in STENCIL.iter().enumerate() {
                let d = [c[0] + off[0], c[1] + off[1], c[2] + off[2]];
                if k == 0 {
                    if !owned_c {
                        continue;
                    }
                    let n = self.units(idx, &mut ua);
                    for s in 0..n {
                        self.within(ua[s], visitor, &mut stats);
                        for t in s + 1..n {
                            self.across(ua[s], ua[t], visitor, &mut stats);
                        }
                    }
                    continue;
                }
                if !self.in_ext(d) || !(owned_c || self.is_owned_cell(d)) {
                    continue;
                }
                let jdx = self.linear(d);
                if self.starts[jdx] == self.starts[jdx + 1] {
                    continue;
                }
                let na = self.units(idx, &mut ua);
                let nb = self.units(jdx, &mut ub);
                for a in &ua[..na] {
                    for b in &ub[..nb] {
                        if reachable(a, b) {
                            self.across(*a, *b, visitor, &mut stats);
                        }
                    }
                }
            }
        }
        stats
    }

    #[inline]
    fn mode(&self, i: u32, j: u32) -> Option<PairMode> {
        let n = self.n_owned as u32;
        match (i < n, j < n) {
            (true, true) => Some(PairMode::Both),
            (true, false) => Some(PairMode::FirstOnly),
            (false, true) => Some(PairMode::SecondOnly),
            (false, false) => None,
        }
    }

    fn within(&self, u: Unit, visitor: &mut impl PairVisitor, stats: &mut PairTraversalStats) {
        let (s, e) = (u.start as usize, u.end as usize);
        for a in s..e {
            let ra = self.sorted[a];
            for b in a + 1..e {
                let d = ra - self.sorted[b];
                let r2 = d.norm2();
                stats.distances_computed += 1;
                if r2 < self.cutoff2 {
                    let (i, j) = (self.order[a], self.order[b]);
                    if let Some(m) = self.mode(i, j) {
                        stats.pairs_within_cutoff += 1;
                        visitor.visit(i as usize, j as usize, d, r2, m);
                    }
                }
            }
        }
    }

    fn across(&self, u: Unit, w: Unit, visitor: &mut impl PairVisitor, stats: &mut PairTraversalStats) {
        let (ws, we) = (w.start as usize, w.end as usize);
        for a in u.start as usize..u.end as usize {
            let ra = self.sorted[a];
            for b in ws..we {
                let d = ra - self.sorted[b];
                let r2 = d.norm2();
                stats.distances_computed += 1;
                if r2 < self.cutoff2 {
                    let (i, j) = (self.order[a], self.order[b]);
                    if let Some(m) = self.mode(i, j) {
                        stats.pairs_within_cutoff += 1;
                        visitor.visit(i as usize, j as usize, d, r2, m);
                    }
                }
            }
        }
    }

    /// Number of owned-cell molecules in each of the 27 cells around every
    /// owned cell, as `(global cell, own count, neighbor count sum)`.
    pub fn neighbor_counts(&self) -> Vec<([i64; 3], usize, usize)> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 1..=dims[2] as i64 {
            for y in 1..=dims[1] as i64 {
                for x in 1..=dims[0] as i64 {
                    let c = [x, y, z];
                    let own = self.occupancy(c);
                    let mut nb = 0;
                    for dz in -1..=1 {
                        for dy in -1..=1 {
                            for dx in -1..=1 {
                                if (dx, dy, dz) != (0, 0, 0) {
                                    nb += self.occupancy([x + dx, y + dy, z + dz]);
                                }
                            }
                        }
                    }
                    out.push((self.global_of_local(c), own, nb));
                }
            }
        }
        out
    }
}

#[inline]
fn reachable(a: &Unit, b: &Unit) -> bool {
    (0..3).all(|k| {
        let gap = (b.lo[k] - a.hi[k]).max(a.lo[k] - b.hi[k]).max(0);
        gap <= 2
    })
}

/// Builds a single-domain grid over the whole box with every molecule owned
/// and no halo copies.
pub fn build_grid(box_len: Vec3, cutoff: f64, positions: &[Vec3], adaptive: Option<usize>) -> Result<CellGrid> {
    let (dims, _) = grid_geometry(box_len, cutoff)?;
    let mut g = CellGrid::new(box_len, cutoff, CellBox::whole(dims))?;
    g.bin(positions, positions.len());
    if let Some(t) = adaptive {
        g.refine(t);
    }
    Ok(g)
}

/// Refined copy of a grid.
pub fn refine_cells(grid: &CellGrid, threshold: usize) -> CellGrid {
    let mut g = grid.clone();
    g.refine(threshold);
    g
}

/// Periodic images of owned molecules that populate the halo of a
/// single-domain grid, as `(source index, image position)`.
pub fn periodic_images(positions: &[Vec3], box_len: Vec3, cutoff: f64) -> Result<Vec<(usize, Vec3)>> {
    let (dims, edge) = grid_geometry(box_len, cutoff)?;
    let inv = Vec3::new(1.0 / edge.x, 1.0 / edge.y, 1.0 / edge.z);
    let whole = CellBox::whole(dims);
    let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); whole.n_cells()];
    for (i, &r) in positions.iter().enumerate() {
        let c = global_cell(r, inv, dims);
        by_cell[c[0] as usize + dims[0] * (c[1] as usize + dims[1] * c[2] as usize)].push(i);
    }
    let mut out = Vec::new();
    for (src, shift) in halo_sources(dims, &whole, &whole) {
        let s = Vec3::new(shift[0] as f64, shift[1] as f64, shift[2] as f64).hadamard(box_len);
        for &i in &by_cell[src[0] as usize + dims[0] * (src[1] as usize + dims[1] * src[2] as usize)] {
            out.push((i, positions[i] + s));
        }
    }
    Ok(out)
}
