//! Configuration files, the `run` pipeline, output files and the benchmark
//! drivers behind the command-line tool.
//!
//! Config files are flat `key = value` lines with `#` comments. Values carry
//! the units selected by `units`: `reduced` takes every number verbatim,
//! `atomic` takes SI-facing values (length m, time s, temperature K, density
//! mol/l, mass kg/mol) and converts them on the way in. LJ well depths are
//! given as temperatures (epsilon / k_B).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::balance::{run_parallel, LoadTraceRow, RunOptions, RunOutput};
use crate::engine::{run_serial, MetricsRow};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::model::{read_checkpoint, write_checkpoint, AxisPolicy, Ensemble, LjForm, LongRange, SimConfig, Species};
use crate::scenarios::{ethylene_oxide_standin, generate, LatticeKind, ScenarioKind, ScenarioSpec};
use crate::units::{Dimension, UnitSystem};

/// Steps excluded from timing at the start of every benchmark run.
pub const WARMUP_STEPS: u64 = 10;

const KEYS: &[&str] = &[
    "units",
    "cutoff",
    "dt",
    "steps",
    "seed",
    "ensemble",
    "thermostat.temperature",
    "thermostat.interval",
    "potential.form",
    "potential.long_range",
    "potential.rf_epsilon",
    "species",
    "species.sigma",
    "species.epsilon",
    "species.mass",
    "species.file",
    "cells.adaptive_threshold",
    "balance.workers",
    "balance.rebalance_interval",
    "balance.axis_policy",
    "balance.decomposition",
    "scenario.kind",
    "scenario.n",
    "scenario.density",
    "scenario.box",
    "scenario.temperature",
    "scenario.lattice",
    "scenario.species",
    "scenario.droplet_radius",
    "scenario.droplet_offset",
    "scenario.vapor_density",
    "scenario.slab_thickness",
    "output.trajectory_every",
    "output.timing",
];

/// Raw `key = value` pairs with the line each came from.
#[derive(Clone, Debug, Default)]
struct Entries {
    map: BTreeMap<String, (usize, String)>,
    dir: Option<PathBuf>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(Error::Parse { line, msg: format!("expected `key = value`, got `{body}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Parse { line, msg: format!("unknown key `{k}`") });
            }
            if v.is_empty() {
                return Err(Error::Parse { line, msg: format!("key `{k}` has no value") });
            }
            if let Some((first, _)) = map.insert(k.to_string(), (line, v.to_string())) {
                return Err(Error::Parse { line, msg: format!("key `{k}` already set on line {first}") });
            }
        }
        Ok(Entries { map, dir: None })
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => {
                v.parse().map(Some).map_err(|_| Error::Parse { line, msg: format!("`{key}`: cannot parse `{v}`") })
            }
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse_as(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    fn choice<'a>(&self, key: &str, options: &[&'a str], default: &'a str) -> Result<&'a str> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => options.iter().copied().find(|o| *o == v).ok_or_else(|| Error::Parse {
                line,
                msg: format!("`{key}` must be one of {}, got `{v}`", options.join(", ")),
            }),
        }
    }

    fn vec3(&self, key: &str) -> Result<Option<Vec3>> {
        let Some((line, v)) = self.raw(key) else { return Ok(None) };
        let nums: std::result::Result<Vec<f64>, _> = v.split_whitespace().map(str::parse).collect();
        match nums.as_deref() {
            Ok([a]) => Ok(Some(Vec3::splat(*a))),
            Ok([a, b, c]) => Ok(Some(Vec3::new(*a, *b, *c))),
            _ => Err(Error::Parse { line, msg: format!("`{key}` needs one or three numbers") }),
        }
    }
}

/// A parsed configuration file: the engine config, the scenario to generate
/// and output options. All numbers are in internal units.
#[derive(Clone, Debug)]
pub struct Config {
    pub sim: SimConfig,
    pub scenario: ScenarioSpec,
    pub uniform_volume: bool,
    pub trajectory_every: Option<u64>,
    pub timing: bool,
}

impl Config {
    pub fn run_options(&self) -> RunOptions {
        RunOptions { uniform_volume: self.uniform_volume, snapshot_every: self.trajectory_every, timing: self.timing }
    }
}

pub fn parse_config(text: &str) -> Result<Config> {
    build_config(&Entries::parse(text)?)
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)?;
    let mut e = Entries::parse(&text)?;
    e.dir = path.parent().map(Path::to_path_buf);
    build_config(&e)
}

fn build_config(e: &Entries) -> Result<Config> {
    let units = match e.choice("units", &["reduced", "atomic"], "reduced")? {
        "atomic" => UnitSystem::atomic(),
        _ => UnitSystem::reduced(),
    };
    let reduced = units == UnitSystem::reduced();
    let conv = |key: &str, dim: Dimension| -> Result<Option<f64>> {
        Ok(e.parse_as::<f64>(key)?.map(|v| units.to_internal(v, dim)))
    };
    let cutoff = units.to_internal(e.required("cutoff")?, Dimension::Length);
    let dt = units.to_internal(e.required("dt")?, Dimension::Time);

    let kind =
        match e.choice("scenario.kind", &["homogeneous", "droplet", "planar_interface", "lattice"], "homogeneous")? {
            "droplet" => ScenarioKind::Droplet,
            "planar_interface" => ScenarioKind::PlanarInterface,
            "lattice" => ScenarioKind::Lattice,
            _ => ScenarioKind::Homogeneous,
        };
    let heterogeneous = matches!(kind, ScenarioKind::Droplet | ScenarioKind::PlanarInterface);
    let density = match conv("scenario.density", Dimension::Density)? {
        Some(d) => d,
        None if reduced => {
            if heterogeneous {
                0.62
            } else {
                0.6223
            }
        }
        None => return Err(Error::MissingKey("scenario.density".into())),
    };
    let vapor_density = match conv("scenario.vapor_density", Dimension::Density)? {
        Some(d) => d,
        None if reduced || !heterogeneous => 0.01,
        None => return Err(Error::MissingKey("scenario.vapor_density".into())),
    };
    let temperature = match conv("scenario.temperature", Dimension::Temperature)? {
        Some(t) => t,
        None if reduced => 0.95,
        None => return Err(Error::MissingKey("scenario.temperature".into())),
    };
    let box_len = e.vec3("scenario.box")?.map(|b| b * units.to_internal(1.0, Dimension::Length));
    let scenario = ScenarioSpec {
        kind,
        n: e.parse_as("scenario.n")?,
        box_len,
        density,
        vapor_density,
        temperature,
        species: e.parse_as("scenario.species")?.unwrap_or(0),
        lattice: match e.choice("scenario.lattice", &["sc", "fcc"], "sc")? {
            "fcc" => LatticeKind::Fcc,
            _ => LatticeKind::SimpleCubic,
        },
        droplet_radius: conv("scenario.droplet_radius", Dimension::Length)?.unwrap_or(0.0),
        droplet_offset: e.vec3("scenario.droplet_offset")?.unwrap_or(Vec3::splat(0.05)),
        slab_thickness: conv("scenario.slab_thickness", Dimension::Length)?.unwrap_or(0.0),
        seed: e.parse_as("seed")?.unwrap_or(0),
    };

    let species = match e.choice("species", &["lj", "ethylene_oxide", "file"], "lj")? {
        "ethylene_oxide" => vec![ethylene_oxide_standin(0)?],
        "file" => {
            let (_, p) = e.raw("species.file").ok_or_else(|| Error::MissingKey("species.file".into()))?;
            let path = match &e.dir {
                Some(d) if Path::new(p).is_relative() => d.join(p),
                _ => PathBuf::from(p),
            };
            let f = fs::File::open(&path)?;
            read_checkpoint(std::io::BufReader::new(f))?.species
        }
        _ => {
            let sigma = conv("species.sigma", Dimension::Length)?.unwrap_or(1.0);
            let eps = conv("species.epsilon", Dimension::Temperature)?.unwrap_or(1.0);
            let mass = conv("species.mass", Dimension::Mass)?.unwrap_or(1.0);
            vec![Species::lj_atom(0, sigma, eps, mass)?]
        }
    };

    let mut sim = SimConfig::lj(box_len.unwrap_or(Vec3::ZERO), cutoff, dt);
    sim.species = species;
    sim.n_steps = e.parse_as("steps")?.unwrap_or(100);
    sim.seed = scenario.seed;
    sim.ensemble = match e.choice("ensemble", &["nve", "nvt"], "nve")? {
        "nvt" => Ensemble::Nvt,
        _ => Ensemble::Nve,
    };
    sim.target_temperature = conv("thermostat.temperature", Dimension::Temperature)?.unwrap_or(temperature);
    sim.thermostat_interval = e.parse_as("thermostat.interval")?.unwrap_or(1);
    sim.lj_form = match e.choice("potential.form", &["lj", "ljts"], "ljts")? {
        "lj" => LjForm::Truncated,
        _ => LjForm::TruncatedShifted,
    };
    sim.long_range = match e.choice("potential.long_range", &["none", "lj_tail", "reaction_field"], "none")? {
        "lj_tail" => LongRange::LjTail,
        "reaction_field" => LongRange::LjTailReactionField(e.required("potential.rf_epsilon")?),
        _ => LongRange::None,
    };
    sim.adaptive_threshold = e.parse_as("cells.adaptive_threshold")?;
    sim.workers = e.parse_as("balance.workers")?.unwrap_or(1);
    sim.rebalance_interval = e.parse_as("balance.rebalance_interval")?.unwrap_or(100);
    sim.axis_policy = match e.choice("balance.axis_policy", &["alternate", "longest"], "alternate")? {
        "longest" => AxisPolicy::Longest,
        _ => AxisPolicy::Alternate,
    };
    let uniform_volume = e.choice("balance.decomposition", &["kd", "uniform"], "kd")? == "uniform";
    let trajectory_every = e.parse_as("output.trajectory_every")?;
    let timing = e.parse_as("output.timing")?.unwrap_or(false);
    Ok(Config { sim, scenario, uniform_volume, trajectory_every, timing })
}

/// Command-line overrides for [`run`].
#[derive(Clone, Debug, Default)]
pub struct RunFlags {
    pub steps: Option<u64>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub timing: bool,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub molecules: usize,
    pub last: MetricsRow,
    pub out_dir: PathBuf,
    pub output: RunOutput,
}

/// Applies overrides, generates the scenario and returns the ready engine config.
pub fn prepare(cfg: &Config, flags: &RunFlags) -> Result<(SimConfig, Vec<crate::model::MoleculeState>, RunOptions)> {
    let mut cfg = cfg.clone();
    if let Some(s) = flags.steps {
        cfg.sim.n_steps = s;
    }
    if let Some(p) = flags.workers {
        cfg.sim.workers = p;
    }
    if let Some(s) = flags.seed {
        cfg.scenario.seed = s;
        cfg.sim.seed = s;
    }
    cfg.timing |= flags.timing;
    let (sim, states) = generate(&cfg.scenario, &cfg.sim)?;
    sim.validate()?;
    Ok((sim, states, cfg.run_options()))
}

/// Parses, generates, runs and writes `metrics.csv`, `trajectory.txt` and
/// `loadtrace.csv` into the output directory (default: current directory).
pub fn run(config: &Path, flags: &RunFlags) -> Result<RunSummary> {
    run_config(&load_config(config)?, flags)
}

pub fn run_config(cfg: &Config, flags: &RunFlags) -> Result<RunSummary> {
    let (sim, states, opts) = prepare(cfg, flags)?;
    let molecules = states.len();
    let output = run_parallel(&sim, states, &opts)?;
    let out_dir = flags.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;
    write_outputs(&out_dir, &sim, &output)?;
    let last = *output.metrics.last().ok_or_else(|| Error::InvalidInput("run produced no metrics".into()))?;
    Ok(RunSummary { molecules, last, out_dir, output })
}

pub fn write_outputs(dir: &Path, sim: &SimConfig, out: &RunOutput) -> Result<()> {
    let mut m = BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
    writeln!(m, "{}", MetricsRow::HEADER)?;
    for r in &out.metrics {
        writeln!(m, "{}", r.to_csv())?;
    }
    m.flush()?;
    let mut l = BufWriter::new(fs::File::create(dir.join("loadtrace.csv"))?);
    writeln!(l, "{}", LoadTraceRow::HEADER)?;
    for r in &out.loadtrace {
        writeln!(l, "{}", r.to_csv())?;
    }
    l.flush()?;
    let mut t = BufWriter::new(fs::File::create(dir.join("trajectory.txt"))?);
    for (step, frame) in &out.frames {
        write_checkpoint(&mut t, sim.box_len, *step, &sim.species, frame)?;
    }
    write_checkpoint(&mut t, sim.box_len, sim.n_steps, &sim.species, &out.final_states)?;
    t.flush()?;
    Ok(())
}

/// Validates a config file and the scenario it describes without running.
pub fn check(config: &Path) -> Result<(SimConfig, usize)> {
    let cfg = load_config(config)?;
    let (sim, states, _) = prepare(&cfg, &RunFlags::default())?;
    Ok((sim, states.len()))
}

/// Timing of one system size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingPoint {
    pub molecules: usize,
    pub timed_steps: u64,
    pub step_seconds: f64,
    pub seconds_per_molecule_step: f64,
}

/// Serial step time of homogeneous systems of the requested sizes at the
/// config's state point. The first [`WARMUP_STEPS`] steps are not timed.
pub fn bench_scaling(cfg: &Config, sizes: &[usize], timed_steps: u64) -> Result<Vec<ScalingPoint>> {
    if timed_steps == 0 {
        return Err(Error::InvalidInput("need at least one timed step".into()));
    }
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n == 0 {
            return Err(Error::InvalidInput("molecule count must be positive".into()));
        }
        let mut c = cfg.clone();
        c.scenario.kind = ScenarioKind::Homogeneous;
        c.scenario.n = Some(n);
        c.scenario.box_len = None;
        c.sim.n_steps = WARMUP_STEPS + timed_steps;
        let (sim, states) = generate(&c.scenario, &c.sim)?;
        let molecules = states.len();
        let opts = RunOptions { timing: true, ..Default::default() };
        let run = run_serial(&sim, states, &opts)?;
        let secs = timed_seconds(&run);
        let step_seconds = secs / timed_steps as f64;
        out.push(ScalingPoint {
            molecules,
            timed_steps,
            step_seconds,
            seconds_per_molecule_step: step_seconds / molecules as f64,
        });
    }
    Ok(out)
}

fn timed_seconds(run: &RunOutput) -> f64 {
    run.metrics.iter().filter(|r| r.step > WARMUP_STEPS).map(|r| r.wall_ms).sum::<f64>() * 1e-3
}

/// One side of a decomposition comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceSide {
    /// Critical-path time of the timed steps.
    pub seconds: f64,
    /// Mean over steps of max/mean estimated worker cost.
    pub load_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceReport {
    pub workers: usize,
    pub molecules: usize,
    pub kd: BalanceSide,
    pub uniform: BalanceSide,
}

impl BalanceReport {
    /// k-d time relative to the uniform decomposition.
    pub fn time_ratio(&self) -> f64 {
        self.kd.seconds / self.uniform.seconds
    }
}

/// Runs the config's scenario on `workers` workers twice, once with the
/// load-balanced tree and once with the uniform-volume decomposition.
pub fn bench_balance(cfg: &Config, workers: usize, timed_steps: u64) -> Result<BalanceReport> {
    if timed_steps == 0 {
        return Err(Error::InvalidInput("need at least one timed step".into()));
    }
    let mut c = cfg.clone();
    c.sim.workers = workers;
    c.sim.n_steps = WARMUP_STEPS + timed_steps;
    let (sim, states) = generate(&c.scenario, &c.sim)?;
    let molecules = states.len();
    let side = |uniform_volume: bool| -> Result<BalanceSide> {
        let opts = RunOptions { uniform_volume, timing: true, ..Default::default() };
        let run = run_parallel(&sim, states.clone(), &opts)?;
        let rows: Vec<&MetricsRow> = run.metrics.iter().filter(|r| r.cost_mean > 0.0).collect();
        let load_ratio = rows.iter().map(|r| r.cost_max / r.cost_mean).sum::<f64>() / rows.len().max(1) as f64;
        Ok(BalanceSide { seconds: timed_seconds(&run), load_ratio })
    };
    let kd = side(false)?;
    let uniform = side(true)?;
    Ok(BalanceReport { workers, molecules, kd, uniform })
}

/// Wall-clock time of the serial engine and of the one-worker parallel path
/// on the same input, best of `repeats`.
pub fn bench_overhead(cfg: &Config, repeats: usize) -> Result<(Duration, Duration)> {
    let mut c = cfg.clone();
    c.sim.workers = 1;
    let (sim, states) = generate(&c.scenario, &c.sim)?;
    let opts = RunOptions::default();
    let mut serial = Duration::MAX;
    let mut parallel = Duration::MAX;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        run_serial(&sim, states.clone(), &opts)?;
        serial = serial.min(t.elapsed());
        let t = Instant::now();
        run_parallel(&sim, states.clone(), &opts)?;
        parallel = parallel.min(t.elapsed());
    }
    Ok((serial, parallel))
}
