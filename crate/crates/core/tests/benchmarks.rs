//! Timing properties of the benchmark drivers. Both checks live in one test
//! so they never run concurrently with each other.

use cellmd::harness::{bench_balance, bench_scaling, parse_config};

#[test]
fn benchmark_drivers() {
    let cfg = parse_config("cutoff = 2.5\ndt = 0.002\n").unwrap();
    let p = bench_scaling(&cfg, &[32768, 64000], 10).unwrap();
    let ratio = p[1].step_seconds / p[0].step_seconds;
    let n_ratio = p[1].molecules as f64 / p[0].molecules as f64;
    println!(
        "step time {:.4} s -> {:.4} s for N {} -> {}",
        p[0].step_seconds, p[1].step_seconds, p[0].molecules, p[1].molecules
    );
    assert!((ratio / n_ratio * 2.0 - 2.0).abs() <= 0.5, "time ratio {ratio} for size ratio {n_ratio}");

    let homogeneous = parse_config("cutoff = 2.5\ndt = 0.002\nscenario.n = 8000\n").unwrap();
    let r = bench_balance(&homogeneous, 8, 30).unwrap();
    println!(
        "homogeneous p = 8: k-d {:.4} s (load {:.2}), uniform {:.4} s (load {:.2})",
        r.kd.seconds, r.kd.load_ratio, r.uniform.seconds, r.uniform.load_ratio
    );
    assert!((r.time_ratio() - 1.0).abs() <= 0.15, "k-d / uniform = {}", r.time_ratio());
}
