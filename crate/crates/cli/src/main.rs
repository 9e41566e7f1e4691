use std::path::PathBuf;
use std::process::ExitCode;

use cellmd::harness::{self, RunFlags};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cellmd", version, about = "Rigid-molecule MD with linked cells and k-d tree load balancing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured scenario, run it and write metrics.csv,
    /// trajectory.txt and loadtrace.csv.
    Run {
        config: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record per-step CPU times (otherwise written as zero).
        #[arg(long)]
        timing: bool,
    },
    /// Per-molecule step time of homogeneous systems of several sizes.
    BenchScaling {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "4000,32000,256000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        steps: u64,
    },
    /// Load-balanced k-d decomposition against the uniform-volume one.
    BenchBalance {
        config: PathBuf,
        #[arg(long, default_value_t = 8)]
        workers: usize,
        #[arg(long, default_value_t = 100)]
        steps: u64,
    },
    /// Validate a config and its scenario without running.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> cellmd::Result<()> {
    match cmd {
        Command::Run { config, steps, workers, seed, out, timing } => {
            let flags = RunFlags { steps, workers, seed, out, timing };
            let s = harness::run(&config, &flags)?;
            println!(
                "{} molecules, {} steps, E_total {:.10e}, T {:.6}; outputs in {}",
                s.molecules,
                s.last.step,
                s.last.e_total,
                s.last.temperature,
                s.out_dir.display()
            );
            if s.output.clamped > 0 {
                log::warn!("{} overlapping site pairs were clamped during the run", s.output.clamped);
            }
        }
        Command::BenchScaling { config, sizes, steps } => {
            let cfg = harness::load_config(&config)?;
            println!("molecules,step_seconds,seconds_per_molecule_step");
            for p in harness::bench_scaling(&cfg, &sizes, steps)? {
                println!("{},{:.6e},{:.6e}", p.molecules, p.step_seconds, p.seconds_per_molecule_step);
            }
        }
        Command::BenchBalance { config, workers, steps } => {
            let cfg = harness::load_config(&config)?;
            let r = harness::bench_balance(&cfg, workers, steps)?;
            println!("decomposition,workers,molecules,seconds,max_over_mean_load");
            println!("kd,{},{},{:.6},{:.4}", r.workers, r.molecules, r.kd.seconds, r.kd.load_ratio);
            println!("uniform,{},{},{:.6},{:.4}", r.workers, r.molecules, r.uniform.seconds, r.uniform.load_ratio);
            println!("# kd/uniform time ratio {:.3}", r.time_ratio());
        }
        Command::Check { config } => {
            let (sim, n) = harness::check(&config)?;
            println!(
                "ok: {n} molecules, box {} x {} x {}, cutoff {}, {} steps, {} worker(s)",
                sim.box_len.x, sim.box_len.y, sim.box_len.z, sim.cutoff, sim.n_steps, sim.workers
            );
        }
    }
    Ok(())
}
