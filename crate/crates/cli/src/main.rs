use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use scanplan_cli::{expand_sweep, load_tree, plan_jobs, run_jobs, thread_count, write_summary, CliError};

/// Run exploration episodes and controller sweeps, writing per-cycle CSV, JSON summaries and a
/// sweep summary table.
#[derive(Debug, Parser)]
#[command(name = "scanplan", version)]
struct Args {
    /// TOML scenario file; keys mirror the episode configuration tree.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override a configuration key, e.g. `--set mpc.weights.beta=0.8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// `controller` (fu_mpc, fixed30, fixed100, fixed360) or `KEY=V1,V2,...`.
    #[arg(long)]
    sweep: Option<String>,
    /// Episodes per sweep cell; repeat r runs with seed + r.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Base seed (defaults to the configured seed).
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: &Args) -> Result<bool, CliError> {
    let tree = load_tree(args.scenario.as_deref(), &args.overrides)?;
    let cells = expand_sweep(args.sweep.as_deref())?;
    let jobs = plan_jobs(&tree, &cells, args.repeats, args.seed)?;
    let threads = thread_count(std::env::var("SCANPLAN_THREADS").ok().as_deref());
    eprintln!("running {} episode(s) on {} thread(s) into {}", jobs.len(), threads.min(jobs.len()), args.out.display());
    let results = run_jobs(&jobs, &args.out, threads)?;
    let mut all_ok = true;
    for (job, r) in jobs.iter().zip(&results) {
        match r {
            Ok(rec) => {
                let s = &rec.summary;
                eprintln!(
                    "{:<24} seed {:<4} {:<10} t={:>7.2}s traj={:>7.2}m cov={:.3} ape_rmse={:.3e}",
                    job.label, s.seed, s.end_reason, s.time, s.trajectory_m, s.coverage_final, s.ape_proxy_rmse
                );
                all_ok &= rec.ok();
            }
            Err(msg) => {
                eprintln!("{:<24} seed {:<4} {msg}", job.label, job.config.seed);
                all_ok = false;
            }
        }
    }
    write_summary(&args.out, &cells, &results)?;
    Ok(all_ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
