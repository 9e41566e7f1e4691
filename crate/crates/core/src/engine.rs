//! Serial reference engine and the bookkeeping shared with the parallel
//! runtime: step schedule, global observables and run output.

use std::time::Duration;

use cpu_time::ThreadTime;

use crate::balance::{LoadTraceRow, RunOptions, RunOutput};
use crate::cells::{grid_geometry, halo_sources, wrap_position, CellBox, PairTraversalStats};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::ForceField;
use crate::integrate::{rescale_factor, KickMode, Kinetic};
use crate::model::{degrees_of_freedom, Ensemble, MoleculeState, Owner, SimConfig};

/// One line of `metrics.csv`; every quantity is in internal units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub time: f64,
    pub e_kin: f64,
    pub e_pot: f64,
    /// Long-range corrections (dispersion tail, reaction-field self term).
    pub e_corr: f64,
    pub e_total: f64,
    pub temperature: f64,
    pub pressure: f64,
    pub cost_max: f64,
    pub cost_mean: f64,
    pub wall_ms: f64,
}

impl MetricsRow {
    pub const HEADER: &'static str =
        "step,time,e_kin,e_pot,e_corr,e_total,temperature,pressure,cost_max,cost_mean,wall_ms";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6}",
            self.step,
            self.time,
            self.e_kin,
            self.e_pot,
            self.e_corr,
            self.e_total,
            self.temperature,
            self.pressure,
            self.cost_max,
            self.cost_mean,
            self.wall_ms
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 11 {
            return Err(Error::InvalidInput(format!("metrics row needs 11 fields, got {}", f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse().map_err(|_| Error::InvalidInput(format!("bad number {:?}", f[i])))
        };
        Ok(MetricsRow {
            step: f[0].parse().map_err(|_| Error::InvalidInput(format!("bad step {:?}", f[0])))?,
            time: num(1)?,
            e_kin: num(2)?,
            e_pot: num(3)?,
            e_corr: num(4)?,
            e_total: num(5)?,
            temperature: num(6)?,
            pressure: num(7)?,
            cost_max: num(8)?,
            cost_mean: num(9)?,
            wall_ms: num(10)?,
        })
    }
}

/// Kick length and kinetic-energy convention for step `s` of `n`.
///
/// Input velocities are synchronous with positions, so the first kick is a
/// half kick and the last one brings the velocities back to full time.
pub(crate) fn kick_schedule(s: u64, n: u64, dt: f64) -> (f64, KickMode) {
    match (s, n) {
        (0, 0) => (0.0, KickMode::Before),
        (0, _) => (0.5 * dt, KickMode::Before),
        (s, n) if s == n => (0.5 * dt, KickMode::After),
        _ => (dt, KickMode::Average),
    }
}

pub(crate) fn thermostat_due(cfg: &SimConfig, s: u64) -> bool {
    cfg.ensemble == Ensemble::Nvt && s < cfg.n_steps && s.is_multiple_of(cfg.thermostat_interval)
}

pub(crate) fn rebalance_due(cfg: &SimConfig, s: u64) -> bool {
    s > 0 && s < cfg.n_steps && s.is_multiple_of(cfg.rebalance_interval)
}

pub(crate) fn snapshot_due(opts: &RunOptions, s: u64, n: u64) -> bool {
    matches!(opts.snapshot_every, Some(k) if k > 0 && s < n && s.is_multiple_of(k))
}

/// Turns per-step global sums into a metrics row.
pub(crate) struct Observer {
    dt: f64,
    volume: f64,
    dof: f64,
    e_corr: f64,
    p_corr: f64,
}

impl Observer {
    pub fn new(cfg: &SimConfig, ff: &ForceField, states: &[MoleculeState]) -> Result<Self> {
        let mut counts = vec![0usize; cfg.species.len()];
        for s in states {
            counts[s.species] += 1;
        }
        let volume = cfg.volume();
        let (e_corr, p_corr) = ff.corrections(&counts, volume)?;
        Ok(Observer { dt: cfg.dt, volume, dof: degrees_of_freedom(states, &cfg.species) as f64, e_corr, p_corr })
    }

    pub fn temperature(&self, k: &Kinetic) -> Result<f64> {
        if self.dof == 0.0 {
            return Err(Error::UndefinedTemperature);
        }
        Ok(2.0 * k.total() / self.dof)
    }

    pub fn row(&self, step: u64, k: &Kinetic, potential: f64, virial: f64, costs: &[f64], wall_ms: f64) -> MetricsRow {
        let e_kin = k.total();
        let temperature = if self.dof > 0.0 { 2.0 * e_kin / self.dof } else { 0.0 };
        let pressure = (2.0 * k.translational + virial) / (3.0 * self.volume) + self.p_corr;
        let cost_max = costs.iter().cloned().fold(0.0, f64::max);
        let cost_mean = if costs.is_empty() { 0.0 } else { costs.iter().sum::<f64>() / costs.len() as f64 };
        MetricsRow {
            step,
            time: step as f64 * self.dt,
            e_kin,
            e_pot: potential,
            e_corr: self.e_corr,
            e_total: e_kin + potential + self.e_corr,
            temperature,
            pressure,
            cost_max,
            cost_mean,
            wall_ms,
        }
    }
}

pub(crate) fn sort_by_id(states: &mut [MoleculeState]) {
    states.sort_by_key(|s| s.id);
}

/// Runs the whole system in one domain on the calling thread.
pub fn run_serial(cfg: &SimConfig, states: Vec<MoleculeState>, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let ff = ForceField::new(cfg)?;
    let obs = Observer::new(cfg, &ff, &states)?;
    let species = &cfg.species;
    let n = cfg.n_steps;
    let (dims, _) = grid_geometry(cfg.box_len, cfg.cutoff)?;
    let whole = CellBox::whole(dims);
    let mut domain = Domain::new(cfg.box_len, cfg.cutoff, whole)?;
    domain.owned = states
        .into_iter()
        .map(|mut s| {
            s.r = wrap_position(s.r, cfg.box_len);
            s.owner = Owner::Worker(0);
            s
        })
        .collect();
    let plan = vec![halo_sources(domain.dims(), &whole, &whole)];

    let mut out = RunOutput::default();
    let mut stats = PairTraversalStats::default();
    let mut carry = Duration::ZERO;
    for s in 0..=n {
        let clock = ThreadTime::now();
        let halo = domain.halo_exports(&plan).pop().unwrap_or_default();
        domain.set_halo(halo);
        let pass = domain.force_pass(&ff, cfg.adaptive_threshold)?;
        stats.merge(pass.stats);
        out.clamped += pass.clamped;
        let (h, mode) = kick_schedule(s, n, cfg.dt);
        let k = domain.kick(species, h, mode);
        let mut kinetic = Kinetic::default();
        kinetic.add(k);
        let mut potential = 0.0;
        potential += pass.potential;
        let mut virial = 0.0;
        virial += pass.virial;
        if snapshot_due(opts, s, n) {
            let mut snap = domain.owned.clone();
            sort_by_id(&mut snap);
            out.frames.push((s, snap));
        }
        let elapsed = carry + clock.elapsed();
        out.critical_path += elapsed;
        let wall_ms = if opts.timing { elapsed.as_secs_f64() * 1e3 } else { 0.0 };
        if s == 0 || rebalance_due(cfg, s) {
            out.loadtrace.push(LoadTraceRow {
                step: s,
                worker: 0,
                cells: whole.n_cells(),
                molecules: domain.owned.len(),
                estimated_cost: pass.cost,
                wall_ms,
            });
        }
        out.metrics.push(obs.row(s, &kinetic, potential, virial, &[pass.cost], wall_ms));
        if s == n {
            break;
        }
        let clock = ThreadTime::now();
        if thermostat_due(cfg, s) {
            let t = obs.temperature(&kinetic)?;
            domain.scale(rescale_factor(t, cfg.target_temperature)?);
        }
        domain.drift(species, cfg.dt)?;
        carry = clock.elapsed();
    }
    out.traversal = stats;
    out.final_states = std::mem::take(&mut domain.owned);
    sort_by_id(&mut out.final_states);
    Ok(out)
}
