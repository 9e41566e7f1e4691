//! Message-passing worker runtime.
//!
//! Each worker owns one leaf of the decomposition and runs on its own
//! thread. Workers share nothing; they exchange value-copied messages over
//! channels. A step is: halo exchange, force pass, kick, report to the
//! coordinator, wait for its control message (thermostat factor and an
//! optional new decomposition), drift and migration.
//!
//! Messages from one sender arrive in order. Each worker keeps messages that
//! belong to a later phase in a pending buffer, and always consumes them in
//! worker-id order, so reductions and molecule order are deterministic.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use cpu_time::ThreadTime;

use super::{build_tree, CellLoad, DecompositionTree, LoadField};
use crate::cells::{global_cell, grid_geometry, halo_sources, wrap_position, PairTraversalStats};
use crate::domain::{Domain, HaloPlan};
use crate::engine::{kick_schedule, rebalance_due, snapshot_due, sort_by_id, thermostat_due, MetricsRow, Observer};
use crate::error::{Error, Result};
use crate::field::ForceField;
use crate::integrate::{rescale_factor, Kinetic};
use crate::math::{Quat, Vec3};
use crate::model::{MoleculeState, Owner, SimConfig};

/// Read-only copy of a molecule for force evaluation in another domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HaloSnapshot {
    pub id: u64,
    pub species: usize,
    pub r: Vec3,
    pub q: Quat,
}

/// What one worker tells the coordinator after its force pass.
#[derive(Clone, Debug, Default)]
pub struct StepReport {
    pub kinetic: Kinetic,
    pub potential: f64,
    pub virial: f64,
    pub stats: PairTraversalStats,
    pub clamped: u64,
    pub cost: f64,
    pub cells: usize,
    pub n_owned: usize,
    /// Thread CPU time spent on this step since the previous report.
    pub cpu: Duration,
    pub loads: Option<Vec<CellLoad>>,
    pub states: Option<Vec<MoleculeState>>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub enum WorkerMessage {
    HaloExport(Vec<HaloSnapshot>),
    Migrants(Vec<MoleculeState>),
    LoadReport(Box<StepReport>),
    NewDecomposition(Arc<DecompositionTree>),
    /// Momentum scale factor for the step; ends the control phase.
    Proceed(f64),
    Abort(String),
}

#[derive(Clone, Debug)]
struct Envelope {
    from: usize,
    step: u64,
    msg: WorkerMessage,
}

const COORDINATOR: usize = usize::MAX;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Rebuild the k-d tree from measured loads. When false every decomposition
    /// is built over a uniform load field and never changes.
    pub uniform_volume: bool,
    pub snapshot_every: Option<u64>,
    /// Record per-step CPU times in the outputs (otherwise written as zero).
    pub timing: bool,
}

/// One row of `loadtrace.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadTraceRow {
    pub step: u64,
    pub worker: usize,
    pub cells: usize,
    pub molecules: usize,
    pub estimated_cost: f64,
    pub wall_ms: f64,
}

impl LoadTraceRow {
    pub const HEADER: &'static str = "step,worker,cells,molecules,estimated_cost,wall_ms";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.17e},{:.6}",
            self.step, self.worker, self.cells, self.molecules, self.estimated_cost, self.wall_ms
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRow>,
    pub final_states: Vec<MoleculeState>,
    pub loadtrace: Vec<LoadTraceRow>,
    /// Intermediate frames (positions at the step, momenta half a step later).
    pub frames: Vec<(u64, Vec<MoleculeState>)>,
    pub traversal: PairTraversalStats,
    /// Sum over steps of the slowest worker's CPU time.
    pub critical_path: Duration,
    pub clamped: u64,
    /// Molecules owned by each worker after every step.
    pub owned_counts: Vec<Vec<usize>>,
}

struct Mailbox {
    rx: Receiver<Envelope>,
    pending: VecDeque<Envelope>,
}

impl Mailbox {
    fn take(&mut self, want: impl Fn(&Envelope) -> bool) -> Result<Envelope> {
        if let Some(i) = self.pending.iter().position(|e| matches!(e.msg, WorkerMessage::Abort(_)) || want(e)) {
            let e = self.pending.remove(i).expect("index in range");
            return checked(e);
        }
        loop {
            let e = self.rx.recv().map_err(|_| Error::Worker("channel closed".into()))?;
            if matches!(e.msg, WorkerMessage::Abort(_)) || want(&e) {
                return checked(e);
            }
            self.pending.push_back(e);
        }
    }
}

fn checked(e: Envelope) -> Result<Envelope> {
    match e.msg {
        WorkerMessage::Abort(reason) => Err(Error::Worker(format!("aborted: {reason}"))),
        _ => Ok(e),
    }
}

struct Peers {
    me: usize,
    to_workers: Vec<Sender<Envelope>>,
    to_coordinator: Sender<Envelope>,
}

impl Peers {
    fn send(&self, to: usize, step: u64, msg: WorkerMessage) -> Result<()> {
        let tx = if to == COORDINATOR { &self.to_coordinator } else { &self.to_workers[to] };
        tx.send(Envelope { from: self.me, step, msg }).map_err(|_| Error::Worker(format!("worker {to} is gone")))
    }
}

/// Halo plans of worker `me` towards every destination worker.
fn plans_for(tree: &DecompositionTree, me: usize) -> Vec<HaloPlan> {
    let src = &tree.leaves[me].region;
    tree.leaves.iter().map(|d| halo_sources(tree.dims, &d.region, src)).collect()
}

struct Worker<'a> {
    cfg: &'a SimConfig,
    opts: &'a RunOptions,
    ff: &'a ForceField,
    me: usize,
    p: usize,
    peers: Peers,
    mailbox: Mailbox,
}

impl Worker<'_> {
    fn run(&mut self, initial: Vec<MoleculeState>, mut tree: Arc<DecompositionTree>) -> Result<()> {
        let (me, p, n) = (self.me, self.p, self.cfg.n_steps);
        let species = &self.cfg.species;
        let mut domain = Domain::new(self.cfg.box_len, self.cfg.cutoff, tree.leaves[me].region)?;
        domain.owned = initial;
        let mut plans = plans_for(&tree, me);
        let mut carry = Duration::ZERO;
        for s in 0..=n {
            let clock = ThreadTime::now();
            // Halo exchange.
            let mut exports = domain.halo_exports(&plans);
            let own = std::mem::take(&mut exports[me]);
            for (d, h) in exports.into_iter().enumerate() {
                if d != me {
                    self.peers.send(d, s, WorkerMessage::HaloExport(h))?;
                }
            }
            let mut halo = Vec::new();
            for src in 0..p {
                if src == me {
                    halo.extend_from_slice(&own);
                    continue;
                }
                let e = self
                    .mailbox
                    .take(|e| e.from == src && e.step == s && matches!(e.msg, WorkerMessage::HaloExport(_)))?;
                if let WorkerMessage::HaloExport(h) = e.msg {
                    halo.extend(h);
                }
            }
            domain.set_halo(halo);

            let pass = domain.force_pass(self.ff, self.cfg.adaptive_threshold)?;
            let (h, mode) = kick_schedule(s, n, self.cfg.dt);
            let kinetic = domain.kick(species, h, mode);
            let want_loads = s == 0 || rebalance_due(self.cfg, s);
            let states = if s == n || snapshot_due(self.opts, s, n) { Some(domain.owned.clone()) } else { None };
            let report = StepReport {
                kinetic,
                potential: pass.potential,
                virial: pass.virial,
                stats: pass.stats,
                clamped: pass.clamped,
                cost: pass.cost,
                cells: domain.region().n_cells(),
                n_owned: domain.owned.len(),
                cpu: carry + clock.elapsed(),
                loads: want_loads.then(|| domain.cell_loads()),
                states,
                error: None,
            };
            self.peers.send(COORDINATOR, s, WorkerMessage::LoadReport(Box::new(report)))?;
            if s == n {
                break;
            }

            // Control phase: an optional new tree, then the go-ahead.
            let lambda = loop {
                let e = self.mailbox.take(|e| e.from == COORDINATOR && e.step == s)?;
                match e.msg {
                    WorkerMessage::NewDecomposition(t) => tree = t,
                    WorkerMessage::Proceed(l) => break l,
                    other => return Err(Error::Worker(format!("unexpected control message {other:?}"))),
                }
            };
            let clock = ThreadTime::now();
            domain.scale(lambda);
            domain.drift(species, self.cfg.dt)?;

            // Migration to the owners under the current tree.
            let outgoing = domain.emigrants(me, p, |c| tree.owner_of(c));
            for (d, m) in outgoing.into_iter().enumerate() {
                if d != me {
                    self.peers.send(d, s, WorkerMessage::Migrants(m))?;
                }
            }
            domain.set_region(tree.leaves[me].region)?;
            for src in 0..p {
                if src == me {
                    continue;
                }
                let e = self
                    .mailbox
                    .take(|e| e.from == src && e.step == s && matches!(e.msg, WorkerMessage::Migrants(_)))?;
                if let WorkerMessage::Migrants(m) = e.msg {
                    domain.accept(me, m);
                }
            }
            plans = plans_for(&tree, me);
            carry = clock.elapsed();
        }
        Ok(())
    }
}

fn initial_field(cfg: &SimConfig, dims: [usize; 3], states: &[MoleculeState], uniform: bool) -> LoadField {
    if uniform {
        return LoadField::uniform(dims);
    }
    let (_, edge) = grid_geometry(cfg.box_len, cfg.cutoff).expect("validated geometry");
    let inv = Vec3::new(1.0 / edge.x, 1.0 / edge.y, 1.0 / edge.z);
    let mut counts = vec![0usize; dims.iter().product()];
    for s in states {
        let c = global_cell(s.r, inv, dims);
        counts[c[0] as usize + dims[0] * (c[1] as usize + dims[1] * c[2] as usize)] += 1;
    }
    LoadField::from_counts(dims, &counts)
}

/// Runs the simulation on `cfg.workers` worker threads.
pub fn run_parallel(cfg: &SimConfig, states: Vec<MoleculeState>, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let ff = ForceField::new(cfg)?;
    let obs = Observer::new(cfg, &ff, &states)?;
    let p = cfg.workers;
    let n = cfg.n_steps;
    let n_total = states.len();
    let (dims, edge) = grid_geometry(cfg.box_len, cfg.cutoff)?;
    let inv = Vec3::new(1.0 / edge.x, 1.0 / edge.y, 1.0 / edge.z);

    let states: Vec<MoleculeState> = states
        .into_iter()
        .map(|mut s| {
            s.r = wrap_position(s.r, cfg.box_len);
            s
        })
        .collect();
    let mut tree = Arc::new(build_tree(&initial_field(cfg, dims, &states, opts.uniform_volume), p, cfg.axis_policy)?);
    let mut initial = vec![Vec::new(); p];
    for mut s in states {
        let w = tree.owner_of(global_cell(s.r, inv, dims));
        s.owner = Owner::Worker(w as u32);
        initial[w].push(s);
    }

    let (to_coord, coord_rx) = channel();
    let mut to_workers = Vec::with_capacity(p);
    let mut inboxes = Vec::with_capacity(p);
    for _ in 0..p {
        let (tx, rx) = channel();
        to_workers.push(tx);
        inboxes.push(rx);
    }

    thread::scope(|scope| {
        let mut handles = Vec::with_capacity(p);
        for (me, (rx, owned)) in inboxes.into_iter().zip(initial).enumerate() {
            let peers = Peers { me, to_workers: to_workers.clone(), to_coordinator: to_coord.clone() };
            let tree = tree.clone();
            let ff = &ff;
            handles.push(scope.spawn(move || {
                let to_coordinator = peers.to_coordinator.clone();
                let mut w = Worker { cfg, opts, ff, me, p, peers, mailbox: Mailbox { rx, pending: VecDeque::new() } };
                let result = catch_unwind(AssertUnwindSafe(|| w.run(owned, tree)));
                let error = match result {
                    Ok(Ok(())) => return,
                    Ok(Err(Error::Worker(m))) if m.starts_with("aborted") => return,
                    Ok(Err(e)) => e.to_string(),
                    Err(panic) => panic
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "worker panicked".into()),
                };
                let report = StepReport { error: Some(format!("worker {me}: {error}")), ..Default::default() };
                let _ = to_coordinator.send(Envelope {
                    from: me,
                    step: u64::MAX,
                    msg: WorkerMessage::LoadReport(Box::new(report)),
                });
            }));
        }
        drop(to_coord);

        let mut coord = Mailbox { rx: coord_rx, pending: VecDeque::new() };
        let broadcast = |msg: WorkerMessage, step: u64| {
            for tx in &to_workers {
                let _ = tx.send(Envelope { from: COORDINATOR, step, msg: msg.clone() });
            }
        };
        let result = coordinate(cfg, opts, &obs, &mut coord, &broadcast, &mut tree, p, n, n_total);
        if let Err(e) = &result {
            broadcast(WorkerMessage::Abort(e.to_string()), u64::MAX);
        }
        for h in handles {
            let _ = h.join();
        }
        result
    })
}

fn is_error(e: &Envelope) -> bool {
    matches!(&e.msg, WorkerMessage::LoadReport(r) if r.error.is_some())
}

#[allow(clippy::too_many_arguments)]
fn coordinate(
    cfg: &SimConfig,
    opts: &RunOptions,
    obs: &Observer,
    mailbox: &mut Mailbox,
    broadcast: &impl Fn(WorkerMessage, u64),
    tree: &mut Arc<DecompositionTree>,
    p: usize,
    n: u64,
    n_total: usize,
) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    for s in 0..=n {
        let mut reports = Vec::with_capacity(p);
        for w in 0..p {
            let e = mailbox.take(|e| is_error(e) || (e.from == w && e.step == s))?;
            match e.msg {
                WorkerMessage::LoadReport(r) => {
                    if let Some(err) = &r.error {
                        return Err(Error::Worker(err.clone()));
                    }
                    reports.push(*r);
                }
                other => return Err(Error::Worker(format!("unexpected message {other:?}"))),
            }
        }
        let mut kinetic = Kinetic::default();
        let (mut potential, mut virial) = (0.0, 0.0);
        let mut slowest = Duration::ZERO;
        let mut owned = 0;
        for r in &reports {
            kinetic.add(r.kinetic);
            potential += r.potential;
            virial += r.virial;
            out.traversal.merge(r.stats);
            out.clamped += r.clamped;
            slowest = slowest.max(r.cpu);
            owned += r.n_owned;
        }
        if owned != n_total {
            return Err(Error::Worker(format!("step {s}: {owned} molecules owned, expected {n_total}")));
        }
        out.owned_counts.push(reports.iter().map(|r| r.n_owned).collect());
        out.critical_path += slowest;
        let wall_ms = if opts.timing { slowest.as_secs_f64() * 1e3 } else { 0.0 };
        let costs: Vec<f64> = reports.iter().map(|r| r.cost).collect();
        out.metrics.push(obs.row(s, &kinetic, potential, virial, &costs, wall_ms));
        if s == 0 || rebalance_due(cfg, s) {
            for (w, r) in reports.iter().enumerate() {
                out.loadtrace.push(LoadTraceRow {
                    step: s,
                    worker: w,
                    cells: r.cells,
                    molecules: r.n_owned,
                    estimated_cost: r.cost,
                    wall_ms: if opts.timing { r.cpu.as_secs_f64() * 1e3 } else { 0.0 },
                });
            }
        }
        let mut states = Vec::new();
        for r in &mut reports {
            if let Some(st) = r.states.take() {
                states.extend(st);
            }
        }
        if s == n {
            sort_by_id(&mut states);
            out.final_states = states;
            break;
        }
        if !states.is_empty() {
            sort_by_id(&mut states);
            out.frames.push((s, states));
        }

        let lambda = if thermostat_due(cfg, s) {
            rescale_factor(obs.temperature(&kinetic)?, cfg.target_temperature)?
        } else {
            1.0
        };
        if rebalance_due(cfg, s) && !opts.uniform_volume {
            let mut field = LoadField::zeros(tree.dims);
            for r in &reports {
                for c in r.loads.as_deref().unwrap_or(&[]) {
                    field.set(c.cell, c.cost);
                }
            }
            let next = build_tree(&field, p, cfg.axis_policy)?;
            if next.leaves.iter().zip(&tree.leaves).any(|(a, b)| a.region != b.region) {
                *tree = Arc::new(next);
                broadcast(WorkerMessage::NewDecomposition(tree.clone()), s);
            }
        }
        broadcast(WorkerMessage::Proceed(lambda), s);
    }
    Ok(out)
}
