use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acopt::{Mode, RunConfig, RunError};
use clap::Parser;
use serde_json::json;

/// Optimal control of the Allen-Cahn equation with a dynamic boundary
/// condition.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Config file (`key = value` lines, `#` comments)
    config: PathBuf,

    /// Override `mode` from the config
    #[arg(short, long, value_parser = parse_mode)]
    mode: Option<Mode>,

    /// Override `output.dir` from the config
    #[arg(short, long)]
    output_dir: Option<PathBuf>,

    /// Override `seed` from the config
    #[arg(short, long)]
    seed: Option<u64>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn load(args: &Args) -> Result<RunConfig, RunError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() {
    let Ok(raw) = std::env::var("ACOPT_THREADS") else { return };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: ACOPT_THREADS ignored: {e}");
            }
        }
        _ => eprintln!("warning: ACOPT_THREADS={raw} is not a positive integer; ignored"),
    }
}

fn log_failure(dir: Option<&Path>, err: &RunError) {
    eprintln!("error ({}): {err}", err.kind());
    let Some(dir) = dir.filter(|d| d.is_dir()) else { return };
    let record = json!({ "kind": err.kind(), "exit_code": err.exit_code(), "message": err.to_string() });
    if let Err(e) = std::fs::write(dir.join("error.json"), format!("{record}\n")) {
        eprintln!("warning: could not write error log: {e}");
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    configure_threads();
    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            log_failure(args.output_dir.as_deref(), &e);
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = acopt::run(&cfg);
    match &result {
        Ok(s) => {
            s.lines.iter().for_each(|line| println!("{line}"));
            print_checks(&s.checks);
        }
        Err(RunError::Verification(checks)) => print_checks(checks),
        Err(_) => {}
    }
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            log_failure(Some(&cfg.output_dir), &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_checks(checks: &[acopt::verify::Check]) {
    if checks.is_empty() {
        return;
    }
    println!("{:<24} {:>14} {:>3} {:>10}  result", "test", "observed", "", "threshold");
    for c in checks {
        println!(
            "{:<24} {:>14.6e} {:>3} {:>10.1e}  {}",
            c.name,
            c.observed,
            c.relation.symbol(),
            c.threshold,
            if c.passed() { "pass" } else { "FAIL" }
        );
    }
}
