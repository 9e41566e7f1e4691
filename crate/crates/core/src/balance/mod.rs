//! Load estimation and k-d decomposition of the cell grid.
//!
//! Each cell is charged the number of distance computations it causes,
//! `(N_i / 2)(N_i + sum_j N_j)` over its 26 neighbors. The grid is bisected
//! recursively by planes perpendicular to alternating axes; every plane is
//! chosen to split the load in proportion to the worker counts on each side,
//! and every leaf keeps at least two cells along each axis.

mod runtime;

pub use runtime::{run_parallel, HaloSnapshot, LoadTraceRow, RunOptions, RunOutput, StepReport, WorkerMessage};

use std::collections::HashMap;

use crate::cells::CellBox;
use crate::error::{Error, Result};
use crate::model::AxisPolicy;

/// Estimated distance computations for a cell with `n` molecules whose
/// neighbors hold `neighbors` molecules in total.
pub fn cell_cost(n: usize, neighbor_counts: &[usize]) -> f64 {
    let s: usize = neighbor_counts.iter().sum();
    0.5 * n as f64 * (n + s) as f64
}

/// Occupancy and estimated cost of one global cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellLoad {
    pub cell: [i64; 3],
    pub count: usize,
    pub cost: f64,
}

/// Per-cell costs over the whole global grid, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadField {
    pub dims: [usize; 3],
    pub cost: Vec<f64>,
}

impl LoadField {
    pub fn uniform(dims: [usize; 3]) -> Self {
        LoadField { dims, cost: vec![1.0; dims[0] * dims[1] * dims[2]] }
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        LoadField { dims, cost: vec![0.0; dims[0] * dims[1] * dims[2]] }
    }

    /// Costs from a full occupancy grid with periodic neighbors.
    pub fn from_counts(dims: [usize; 3], counts: &[usize]) -> Self {
        let mut f = LoadField::zeros(dims);
        let d = dims.map(|v| v as i64);
        let mut nb = [0usize; 26];
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    let mut k = 0;
                    for dz in -1..=1 {
                        for dy in -1..=1 {
                            for dx in -1..=1 {
                                if (dx, dy, dz) == (0, 0, 0) {
                                    continue;
                                }
                                let c =
                                    [(x + dx).rem_euclid(d[0]), (y + dy).rem_euclid(d[1]), (z + dz).rem_euclid(d[2])];
                                nb[k] = counts[f.index(c)];
                                k += 1;
                            }
                        }
                    }
                    let i = f.index([x, y, z]);
                    f.cost[i] = cell_cost(counts[i], &nb);
                }
            }
        }
        f
    }

    #[inline]
    pub fn index(&self, c: [i64; 3]) -> usize {
        c[0] as usize + self.dims[0] * (c[1] as usize + self.dims[1] * c[2] as usize)
    }

    pub fn get(&self, c: [i64; 3]) -> f64 {
        self.cost[self.index(c)]
    }

    pub fn set(&mut self, c: [i64; 3], v: f64) {
        let i = self.index(c);
        self.cost[i] = v;
    }

    pub fn sum(&self, region: &CellBox) -> f64 {
        region.cells().map(|c| self.get(c)).sum()
    }

    /// Load profile along `axis`, summed over the other two axes.
    pub fn profile(&self, region: &CellBox, axis: usize) -> Vec<f64> {
        let mut p = vec![0.0; region.extent(axis)];
        for c in region.cells() {
            p[(c[axis] - region.lo[axis]) as usize] += self.get(c);
        }
        p
    }
}

/// A chosen plane: cells `0..=index` go left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub index: usize,
    pub left: f64,
    pub right: f64,
    pub imbalance: f64,
}

/// Even split of a 1-D profile with at least two cells per side.
pub fn best_split(profile: &[f64]) -> Result<Split> {
    best_split_weighted(profile, 1, 1, |_| true)
}

/// Plane minimizing `|left * k_right - right * k_left|`, so each side gets
/// load in proportion to its worker count. Only planes accepted by `allowed`
/// (given the left cell count) and leaving two cells per side are
/// considered. Ties go to the plane nearest the proportional position, then
/// to the lower index.
pub fn best_split_weighted(
    profile: &[f64],
    k_left: usize,
    k_right: usize,
    allowed: impl Fn(usize) -> bool,
) -> Result<Split> {
    let n = profile.len();
    if n < 4 {
        return Err(Error::IndivisibleVolume { len: n, min_cells: 2 });
    }
    let total: f64 = profile.iter().sum();
    let (kl, kr) = (k_left as f64, k_right as f64);
    let target = n as f64 * kl / (kl + kr);
    let mut best: Option<(Split, f64)> = None;
    let mut left = 0.0;
    for (i, &c) in profile.iter().enumerate().take(n - 2) {
        left += c;
        let m = i + 1;
        if m < 2 || !allowed(m) {
            continue;
        }
        let right = total - left;
        let imbalance = (left * kr - right * kl).abs();
        let dist = (m as f64 - target).abs();
        let better = match &best {
            None => true,
            Some((b, bd)) => imbalance < b.imbalance || (imbalance == b.imbalance && dist < *bd),
        };
        if better {
            best = Some((Split { index: i, left, right, imbalance }, dist));
        }
    }
    best.map(|b| b.0).ok_or(Error::IndivisibleVolume { len: n, min_cells: 2 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub region: CellBox,
    pub worker: usize,
    pub load: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split { axis: usize, plane: i64, left: Box<Node>, right: Box<Node> },
    Leaf(usize),
}

/// Binary space partition of the cell grid; `leaves[w]` belongs to worker `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionTree {
    pub dims: [usize; 3],
    pub root: Node,
    pub leaves: Vec<Leaf>,
    owner: Vec<u32>,
}

impl DecompositionTree {
    pub fn single(dims: [usize; 3], load: f64) -> Self {
        let region = CellBox::whole(dims);
        let leaves = vec![Leaf { region, worker: 0, load }];
        DecompositionTree { dims, root: Node::Leaf(0), leaves, owner: vec![0; region.n_cells()] }
    }

    pub fn n_workers(&self) -> usize {
        self.leaves.len()
    }

    #[inline]
    pub fn owner_of(&self, c: [i64; 3]) -> usize {
        self.owner[c[0] as usize + self.dims[0] * (c[1] as usize + self.dims[1] * c[2] as usize)] as usize
    }

    /// max / mean of the leaf loads.
    pub fn imbalance(&self) -> f64 {
        let loads: Vec<f64> = self.leaves.iter().map(|l| l.load).collect();
        max_over_mean(&loads)
    }

    /// Leaf loads recomputed against another load field.
    pub fn loads_under(&self, field: &LoadField) -> Vec<f64> {
        self.leaves.iter().map(|l| field.sum(&l.region)).collect()
    }
}

pub fn max_over_mean(loads: &[f64]) -> f64 {
    if loads.is_empty() {
        return 0.0;
    }
    let mean = loads.iter().sum::<f64>() / loads.len() as f64;
    if mean == 0.0 {
        return 1.0;
    }
    loads.iter().cloned().fold(0.0, f64::max) / mean
}

/// How many leaves with at least two cells per axis fit in a box.
fn capacity(extents: [usize; 3]) -> usize {
    extents.iter().map(|e| e / 2).product()
}

/// Memoized test whether a box can be bisected recursively into `k` leaves
/// (split `ceil(k/2)` / `floor(k/2)` at every level) with at least two cells
/// per axis in every leaf.
#[derive(Default)]
struct Feasibility {
    memo: HashMap<([usize; 3], usize), bool>,
}

impl Feasibility {
    fn check(&mut self, mut ext: [usize; 3], k: usize) -> bool {
        if k == 1 {
            return ext.iter().all(|&e| e >= 2);
        }
        if capacity(ext) < k {
            return false;
        }
        ext.sort_unstable();
        if let Some(&v) = self.memo.get(&(ext, k)) {
            return v;
        }
        let (kl, kr) = (k.div_ceil(2), k / 2);
        let mut ok = false;
        'axes: for axis in 0..3 {
            for m in 2..=ext[axis].saturating_sub(2) {
                let mut l = ext;
                l[axis] = m;
                let mut r = ext;
                r[axis] = ext[axis] - m;
                if self.check(l, kl) && self.check(r, kr) {
                    ok = true;
                    break 'axes;
                }
            }
        }
        self.memo.insert((ext, k), ok);
        ok
    }
}

/// Whether a grid of `dims` cells can be split among `p` workers.
pub fn is_decomposable(dims: [usize; 3], p: usize) -> bool {
    p >= 1 && Feasibility::default().check(dims, p)
}

/// Recursive bisection of the grid into `p` leaves.
pub fn build_tree(loads: &LoadField, p: usize, policy: AxisPolicy) -> Result<DecompositionTree> {
    let dims = loads.dims;
    if p == 0 {
        return Err(Error::InvalidInput("need at least one worker".into()));
    }
    let whole = CellBox::whole(dims);
    let mut feasible = Feasibility::default();
    if !feasible.check(dims, p) {
        return Err(Error::OverDecomposed { cells: dims, workers: p });
    }
    let mut leaves = Vec::with_capacity(p);
    let root = bisect(loads, whole, 0, p, 0, policy, &mut feasible, &mut leaves)?;
    leaves.sort_by_key(|l| l.worker);
    let mut owner = vec![0u32; whole.n_cells()];
    for l in &leaves {
        for c in l.region.cells() {
            owner[c[0] as usize + dims[0] * (c[1] as usize + dims[1] * c[2] as usize)] = l.worker as u32;
        }
    }
    Ok(DecompositionTree { dims, root, leaves, owner })
}

#[allow(clippy::too_many_arguments)]
fn bisect(
    loads: &LoadField,
    region: CellBox,
    first_worker: usize,
    k: usize,
    depth: usize,
    policy: AxisPolicy,
    feasible: &mut Feasibility,
    leaves: &mut Vec<Leaf>,
) -> Result<Node> {
    if k == 1 {
        leaves.push(Leaf { region, worker: first_worker, load: loads.sum(&region) });
        return Ok(Node::Leaf(first_worker));
    }
    let (kl, kr) = (k.div_ceil(2), k / 2);
    let ext = region.extents();
    let axes: [usize; 3] = match policy {
        AxisPolicy::Alternate => [depth % 3, (depth + 1) % 3, (depth + 2) % 3],
        AxisPolicy::Longest => {
            let mut a = [0, 1, 2];
            a.sort_by_key(|&i| std::cmp::Reverse(ext[i]));
            a
        }
    };
    for axis in axes {
        let n = ext[axis];
        if n < 4 {
            continue;
        }
        let fits: Vec<bool> = (0..n)
            .map(|m| {
                let mut l = ext;
                l[axis] = m;
                let mut r = ext;
                r[axis] = n - m;
                m >= 2 && n - m >= 2 && feasible.check(l, kl) && feasible.check(r, kr)
            })
            .collect();
        let profile = loads.profile(&region, axis);
        let Ok(s) = best_split_weighted(&profile, kl, kr, |m| fits[m]) else {
            continue;
        };
        let plane = region.lo[axis] + s.index as i64;
        let mut lb = region;
        lb.hi[axis] = plane;
        let mut rb = region;
        rb.lo[axis] = plane + 1;
        let left = bisect(loads, lb, first_worker, kl, depth + 1, policy, feasible, leaves)?;
        let right = bisect(loads, rb, first_worker + kl, kr, depth + 1, policy, feasible, leaves)?;
        return Ok(Node::Split { axis, plane, left: Box::new(left), right: Box::new(right) });
    }
    Err(Error::OverDecomposed { cells: ext, workers: k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn cell_cost_examples() {
        assert_eq!(cell_cost(0, &[5; 26]), 0.0);
        assert_eq!(cell_cost(3, &[7]), 15.0);
        assert_eq!(cell_cost(2, &[0; 26]), 2.0);
    }

    #[test]
    fn best_split_examples() {
        let s = best_split(&[4.0, 4.0, 4.0, 4.0]).unwrap();
        assert_eq!((s.index, s.left, s.right, s.imbalance), (1, 8.0, 8.0, 0.0));
        let s = best_split(&[10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!((s.index, s.left, s.right, s.imbalance), (1, 11.0, 7.0, 4.0));
        let s = best_split(&[1.0; 6]).unwrap();
        assert_eq!((s.index, s.left, s.right), (2, 3.0, 3.0));
        assert!(matches!(best_split(&[1.0, 2.0, 3.0]), Err(Error::IndivisibleVolume { .. })));
    }

    fn exhaustive(profile: &[f64]) -> f64 {
        (2..=profile.len() - 2)
            .map(|m| {
                let l: f64 = profile[..m].iter().sum();
                let r: f64 = profile[m..].iter().sum();
                (l - r).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn best_split_is_optimal(profile in prop::collection::vec(0u32..1000, 4..=32)) {
            let p: Vec<f64> = profile.iter().map(|&v| v as f64).collect();
            let s = best_split(&p).unwrap();
            prop_assert!(s.index >= 1 && s.index + 3 <= p.len());
            prop_assert_eq!(s.imbalance, exhaustive(&p));
        }
    }

    fn check_tiling(t: &DecompositionTree) {
        let mut seen = HashSet::new();
        for l in &t.leaves {
            for k in 0..3 {
                assert!(l.region.extent(k) >= 2, "{l:?}");
            }
            for c in l.region.cells() {
                assert!(seen.insert(c), "overlap at {c:?}");
                assert_eq!(t.owner_of(c), l.worker);
            }
        }
        assert_eq!(seen.len(), t.dims.iter().product::<usize>());
    }

    #[test]
    fn uniform_octants() {
        let t = build_tree(&LoadField::uniform([8, 8, 8]), 8, AxisPolicy::Alternate).unwrap();
        check_tiling(&t);
        for l in &t.leaves {
            assert_eq!(l.region.extents(), [4, 4, 4]);
        }
        let t = build_tree(&LoadField::uniform([8, 8, 8]), 1, AxisPolicy::Alternate).unwrap();
        assert_eq!(t.leaves[0].region, CellBox::whole([8, 8, 8]));
    }

    #[test]
    fn over_decomposition_is_rejected() {
        assert!(matches!(
            build_tree(&LoadField::uniform([4, 4, 4]), 9, AxisPolicy::Alternate),
            Err(Error::OverDecomposed { .. })
        ));
        assert!(build_tree(&LoadField::uniform([4, 4, 4]), 8, AxisPolicy::Alternate).is_ok());
    }

    #[test]
    fn capacity_alone_is_not_enough() {
        // Room for nine 2x2x2 leaves, but a 4 | 4 split of either long axis
        // leaves a 3x2xn or 3x3xn half that holds fewer than four.
        assert_eq!(capacity([3, 6, 6]), 9);
        assert!(!is_decomposable([3, 6, 6], 8));
        assert!(is_decomposable([3, 6, 6], 4));
        assert_eq!(capacity([7, 6, 6]), 27);
        assert!(!is_decomposable([7, 6, 6], 16));
        assert!(matches!(
            build_tree(&LoadField::uniform([7, 6, 6]), 16, AxisPolicy::Longest),
            Err(Error::OverDecomposed { .. })
        ));
        let t = build_tree(&LoadField::uniform([8, 6, 6]), 16, AxisPolicy::Longest).unwrap();
        check_tiling(&t);
    }

    #[test]
    fn dense_block_beats_uniform_quartering() {
        let dims = [16, 16, 16];
        let mut f = LoadField::uniform(dims);
        for c in (CellBox { lo: [3, 5, 6], hi: [6, 8, 9] }).cells() {
            f.set(c, 50.0);
        }
        let kd = build_tree(&f, 4, AxisPolicy::Alternate).unwrap();
        let uni = build_tree(&LoadField::uniform(dims), 4, AxisPolicy::Alternate).unwrap();
        check_tiling(&kd);
        let total: f64 = f.cost.iter().sum();
        assert!((kd.leaves.iter().map(|l| l.load).sum::<f64>() - total).abs() < 1e-9);
        let kd_ratio = max_over_mean(&kd.loads_under(&f));
        let uni_ratio = max_over_mean(&uni.loads_under(&f));
        assert!(kd_ratio < uni_ratio, "{kd_ratio} vs {uni_ratio}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn trees_tile_and_respect_two_cells(
            dx in 4usize..15, dy in 4usize..15, dz in 4usize..15,
            p in 1usize..=20, seed in 0u64..1000, longest in any::<bool>(),
        ) {
            let dims = [dx, dy, dz];
            let mut f = LoadField::zeros(dims);
            let mut s = seed;
            for v in f.cost.iter_mut() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *v = (s >> 40) as f64;
            }
            let policy = if longest { AxisPolicy::Longest } else { AxisPolicy::Alternate };
            match build_tree(&f, p, policy) {
                Ok(t) => {
                    prop_assert_eq!(t.leaves.len(), p);
                    check_tiling(&t);
                }
                Err(Error::OverDecomposed { .. }) => prop_assert!(!is_decomposable(dims, p)),
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }

    #[test]
    fn costs_from_counts_are_periodic() {
        let dims = [3, 3, 3];
        let mut counts = vec![0; 27];
        counts[0] = 2;
        counts[26] = 1; // cell (2,2,2) is a periodic neighbor of (0,0,0)
        let f = LoadField::from_counts(dims, &counts);
        assert_eq!(f.get([0, 0, 0]), 0.5 * 2.0 * 3.0);
        assert_eq!(f.get([2, 2, 2]), 0.5 * 1.0 * 3.0);
        assert_eq!(f.get([1, 1, 1]), 0.0);
    }
}
