//! `scan`: run a phase-space reconstruction scan from a JSON configuration.

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use phase_sampling::scan::{emit_csv, emit_json, write_csv, ScanConfig, ScanError, ScanPlan};

#[derive(Debug, Parser)]
#[command(
    name = "scan",
    version,
    about = "Monte Carlo parity scans of phase space"
)]
struct Args {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,

    /// Photocount events per grid point (overrides the file).
    #[arg(long, conflicts_with = "analytic_only")]
    events: Option<usize>,

    /// Master seed (overrides `master_seed`).
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, value_name = "true|false")]
    compensate: Option<bool>,

    #[arg(long)]
    out_csv: Option<PathBuf>,

    #[arg(long)]
    out_json: Option<PathBuf>,

    /// Skip Monte Carlo sampling; only analytic columns are filled.
    #[arg(long)]
    analytic_only: bool,

    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn apply_overrides(mut config: ScanConfig, args: &Args) -> ScanConfig {
    if let Some(events) = args.events {
        config.events = events;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(compensate) = args.compensate {
        config.compensate = compensate;
    }
    if args.analytic_only {
        config.events = 0;
    }
    config
}

fn run(args: &Args) -> Result<(), ScanError> {
    let config = apply_overrides(ScanConfig::from_path(&args.config)?, args);
    if config.events == 0 && !args.analytic_only {
        return Err(ScanError::Config(
            "events must be at least 1; use --analytic-only to skip sampling".into(),
        ));
    }
    let plan = ScanPlan::new(config)?;
    log::info!(
        "{} points, cutoff {}, base {}",
        plan.amplitudes.len(),
        plan.cutoff.dim(),
        plan.base
    );
    let rows = match args.threads {
        Some(n) => plan.run_with_threads(n)?,
        None => plan.run()?,
    };
    if let Some(path) = &args.out_csv {
        emit_csv(&rows, path)?;
    }
    if let Some(path) = &args.out_json {
        emit_json(&rows, &plan, path)?;
    }
    if args.out_csv.is_none() && args.out_json.is_none() {
        write_csv(&rows, io::stdout().lock())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scan: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
