use cellmd::balance::{run_parallel, RunOptions, RunOutput};
use cellmd::engine::run_serial;
use cellmd::model::{DipoleSite, Ensemble, LjSite, LongRange, MoleculeState, SimConfig, Species};
use cellmd::scenarios::{generate, ScenarioKind, ScenarioSpec};
use cellmd::Vec3;

fn lj_system(n: usize) -> (SimConfig, Vec<MoleculeState>) {
    let mut base = SimConfig::lj(Vec3::ZERO, 2.5, 0.002);
    base.n_steps = 100;
    base.rebalance_interval = 25;
    let spec = ScenarioSpec { kind: ScenarioKind::Homogeneous, n: Some(n), seed: 3, ..Default::default() };
    generate(&spec, &base).unwrap()
}

fn dipolar_system() -> (SimConfig, Vec<MoleculeState>) {
    let sp = Species::new(
        0,
        "two-center-dipole",
        vec![
            LjSite { pos: Vec3::new(0.0, 0.0, 0.4), sigma: 1.0, epsilon: 1.0 },
            LjSite { pos: Vec3::new(0.0, 0.0, -0.4), sigma: 1.0, epsilon: 1.0 },
        ],
        vec![],
        vec![DipoleSite { pos: Vec3::ZERO, axis: Vec3::new(0.0, 0.0, 1.0), mu: 1.5 }],
        vec![],
        1.0,
        Vec3::new(0.16, 0.16, 0.0),
    )
    .unwrap();
    let mut base = SimConfig::lj(Vec3::ZERO, 3.0, 0.001);
    base.species = vec![sp];
    base.n_steps = 100;
    base.rebalance_interval = 30;
    base.long_range = LongRange::LjTailReactionField(10.0);
    let spec = ScenarioSpec {
        kind: ScenarioKind::Homogeneous,
        n: Some(1000),
        density: 0.25,
        temperature: 2.0,
        seed: 5,
        ..Default::default()
    };
    generate(&spec, &base).unwrap()
}

fn opts() -> RunOptions {
    RunOptions { snapshot_every: Some(1), ..Default::default() }
}

fn max_deviation(a: &RunOutput, b: &RunOutput, l: Vec3) -> f64 {
    let mut worst = 0.0f64;
    assert_eq!(a.frames.len(), b.frames.len());
    let frames = a.frames.iter().zip(&b.frames).map(|((_, x), (_, y))| (x, y));
    for (x, y) in frames.chain(std::iter::once((&a.final_states, &b.final_states))) {
        assert_eq!(x.len(), y.len());
        for (p, q) in x.iter().zip(y) {
            assert_eq!(p.id, q.id);
            for k in 0..3 {
                let mut d = p.r[k] - q.r[k];
                d -= l[k] * (d / l[k]).round();
                worst = worst.max(d.abs()).max((p.v[k] - q.v[k]).abs()).max((p.j[k] - q.j[k]).abs());
            }
            worst = worst.max((p.q.w - q.q.w).abs());
        }
    }
    worst
}

fn check_counts(out: &RunOutput, n: usize) {
    assert!(!out.owned_counts.is_empty());
    for c in &out.owned_counts {
        assert_eq!(c.iter().sum::<usize>(), n);
    }
}

#[test]
fn one_worker_is_bitwise_serial() {
    let (cfg, st) = lj_system(1000);
    let s = run_serial(&cfg, st.clone(), &opts()).unwrap();
    let p = run_parallel(&cfg, st, &opts()).unwrap();
    assert_eq!(s.final_states, p.final_states);
    assert_eq!(s.frames, p.frames);
    for (a, b) in s.metrics.iter().zip(&p.metrics) {
        assert_eq!(a.to_csv(), b.to_csv());
    }
}

#[test]
fn lj_workers_agree_with_serial() {
    let (cfg, st) = lj_system(1000);
    let reference = run_serial(&cfg, st.clone(), &opts()).unwrap();
    for p in [2, 4, 8] {
        let mut c = cfg.clone();
        c.workers = p;
        let out = run_parallel(&c, st.clone(), &opts()).unwrap();
        check_counts(&out, st.len());
        let dev = max_deviation(&reference, &out, cfg.box_len);
        assert!(dev < 1e-9, "p = {p}: deviation {dev}");
        let (e0, e1) = (reference.metrics.last().unwrap().e_total, out.metrics.last().unwrap().e_total);
        assert!((e0 - e1).abs() < 1e-9 * e0.abs());
    }
}

#[test]
fn thermostatted_workers_agree_with_serial() {
    let (mut cfg, st) = lj_system(1000);
    cfg.ensemble = Ensemble::Nvt;
    cfg.target_temperature = 1.2;
    cfg.thermostat_interval = 5;
    let reference = run_serial(&cfg, st.clone(), &opts()).unwrap();
    let mut c = cfg.clone();
    c.workers = 4;
    let out = run_parallel(&c, st.clone(), &opts()).unwrap();
    check_counts(&out, st.len());
    assert!(max_deviation(&reference, &out, cfg.box_len) < 1e-9);
}

#[test]
fn dipolar_workers_agree_with_serial() {
    let (cfg, st) = dipolar_system();
    let reference = run_serial(&cfg, st.clone(), &opts()).unwrap();
    for p in [2, 8] {
        let mut c = cfg.clone();
        c.workers = p;
        let out = run_parallel(&c, st.clone(), &opts()).unwrap();
        check_counts(&out, st.len());
        let dev = max_deviation(&reference, &out, cfg.box_len);
        assert!(dev < 1e-9, "p = {p}: deviation {dev}");
    }
}

#[test]
fn uniform_decomposition_agrees_with_serial() {
    let (mut cfg, st) = lj_system(1000);
    cfg.workers = 8;
    let reference = run_serial(&cfg, st.clone(), &opts()).unwrap();
    let o = RunOptions { uniform_volume: true, ..opts() };
    let out = run_parallel(&cfg, st.clone(), &o).unwrap();
    check_counts(&out, st.len());
    assert!(max_deviation(&reference, &out, cfg.box_len) < 1e-9);
}

#[test]
fn too_many_workers_is_an_error() {
    let (mut cfg, st) = lj_system(1000);
    cfg.workers = 9;
    assert!(run_parallel(&cfg, st, &RunOptions::default()).is_err());
}
