//! `corrolab CONFIG [--mode M] [--workers N] [--out DIR]`
//!
//! Exit status: 0 when every check passes, 1 when a check fails or the run
//! aborts, 2 on a configuration error.

mod config;
mod modes;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::Local;
use clap::Parser;

use config::{ConfigParseError, Mode};
use report::Check;

#[derive(Debug, Parser)]
#[command(
    name = "corrolab",
    version,
    about = "Batch driver for corrosion-detection experiments"
)]
struct Args {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Overrides `experiment.mode`.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Overrides `experiment.workers` (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `experiment.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

/// Returns the exit status of a run that got past configuration.
fn execute(args: &Args) -> Result<u8, ConfigParseError> {
    let text = fs::read_to_string(&args.config).map_err(|e| ConfigParseError {
        field: None,
        line: None,
        message: format!("cannot read {}: {e}", args.config.display()),
    })?;
    let mut cfg = config::parse(&text)?;
    if let Some(mode) = args.mode {
        cfg.experiment.mode = mode;
    }
    if let Some(workers) = args.workers {
        cfg.experiment.workers = workers;
    }
    if let Some(out) = &args.out {
        cfg.experiment.output_dir = out.clone();
    }
    let base_dir = args.config.parent().unwrap_or(Path::new("."));
    let resolved = config::resolve(cfg, &text, base_dir)?;
    let mode = resolved.config.experiment.mode;

    let started = Local::now();
    let clock = Instant::now();
    let dir = match report::fresh_run_dir(&resolved.config.experiment.output_dir, mode, started) {
        Ok(dir) => dir,
        Err(e) => {
            eprintln!(
                "cannot create a run directory under {}: {e}",
                resolved.config.experiment.output_dir.display()
            );
            return Ok(1);
        }
    };

    let (checks, files) = match modes::run(&resolved, mode) {
        Ok(outcome) => (outcome.checks, outcome.files),
        Err(e) => {
            let mut checks = modes::assumption_checks(&resolved);
            checks.push(Check::new(mode.to_string(), false, format!("aborted: {e}")));
            (checks, Vec::new())
        }
    };
    let status: u8 = if checks.iter().all(|c| c.pass) { 0 } else { 1 };

    let mut written = vec!["checks.csv".to_string()];
    let write = |name: &str, contents: &str| -> bool {
        match fs::write(dir.join(name), contents) {
            Ok(()) => true,
            Err(e) => {
                eprintln!("cannot write {}: {e}", dir.join(name).display());
                false
            }
        }
    };
    let mut ok = write("checks.csv", &report::checks_csv(&checks));
    for (name, contents) in &files {
        ok &= write(name, contents);
        written.push(name.clone());
    }
    let manifest = report::manifest(
        &resolved.config,
        &args.config,
        started,
        clock.elapsed().as_secs_f64(),
        i32::from(status),
        &written,
    );
    ok &= write("manifest.toml", &manifest);

    let passed = checks.iter().filter(|c| c.pass).count();
    for c in checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {}", c.label, c.detail);
    }
    println!("{mode}: {passed}/{} checks passed", checks.len());
    println!("reports in {}", dir.display());
    Ok(if ok { status } else { 1 })
}
