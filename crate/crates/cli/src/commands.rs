//! The four subcommands. Each returns whether its checks passed; errors are
//! usage or config problems.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use dispersim::trace::{initial_placement, read_jsonl, summarize, write_jsonl, Summary};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Faults, RunConfig};
use crate::exec::{execute, exhaust};
use crate::suites::{run_suite, SUITES};
use crate::sweep::{sweep, write_csv, SweepConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    fs::write(path, contents).map_err(io(path))
}

/// Pretty JSON with a trailing newline, the format of every report file.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

pub fn summary_line(s: &Summary) -> String {
    format!(
        "rounds={} dispersed={} alive={} max_memory_bits={} trace_hash={}",
        s.rounds_elapsed, s.dispersed, s.alive_count, s.max_memory_bits, s.trace_hash
    )
}

fn required(config: Option<&Path>) -> Result<&Path, CliError> {
    config.ok_or_else(|| CliError::Usage("--config PATH is required".into()))
}

/// One simulation. Writes `trace.jsonl` and `summary.json`, or `report.json`
/// for an exhaustive fault spec.
pub fn cmd_run(
    config: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<bool, CliError> {
    let config = RunConfig::load(required(config)?)?;
    let inst = config.resolve(seed)?;
    let out = out
        .map(Path::to_owned)
        .or(config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match &inst.faults {
        Faults::Fixed(schedule) => {
            let o = execute(&inst, schedule.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut trace = Vec::new();
            write_jsonl(&mut trace, &o.trace).expect("writing to memory");
            write(&out.join("trace.jsonl"), &trace)?;
            write(&out.join("summary.json"), to_json(&o.summary).as_bytes())?;
            println!("{}", summary_line(&o.summary));
            for p in &o.problems {
                eprintln!("violation: {p}");
            }
            Ok(o.passed())
        }
        Faults::Exhaustive { f, horizon } => {
            let report =
                exhaust(&inst, *f, *horizon).map_err(|e| CliError::Usage(e.to_string()))?;
            write(&out.join("report.json"), to_json(&report).as_bytes())?;
            println!(
                "schedules={} failures={} max_rounds={} max_memory_bits={}",
                report.schedules_tested,
                report.failures.len(),
                report.max_rounds,
                report.max_memory_bits
            );
            if let Some(f) = report.failures.first() {
                eprintln!("first failure: crashes {:?}: {}", f.schedule, f.reason);
            }
            Ok(report.passed())
        }
    }
}

/// A grid of runs, one CSV row each, in `results.csv`. Passes when every
/// row dispersed without errors.
pub fn cmd_sweep(
    config: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<bool, CliError> {
    let config = SweepConfig::load(required(config)?)?;
    let rows = sweep(&config, seed);
    let out = out.map_or_else(|| PathBuf::from("out"), Path::to_owned);
    let mut csv = Vec::new();
    write_csv(&mut csv, &rows).map_err(|e| CliError::Usage(e.to_string()))?;
    let path = out.join("results.csv");
    write(&path, &csv)?;
    let failed = rows
        .iter()
        .filter(|r| !r.dispersed || !r.error.is_empty())
        .count();
    println!(
        "{} rows, {failed} failed, written to {}",
        rows.len(),
        path.display()
    );
    Ok(failed == 0)
}

/// Runs a verification suite and writes its report to `<suite>.json`.
pub fn cmd_verify(suite: &str, out: Option<&Path>, seed: Option<u64>) -> Result<bool, CliError> {
    let report = run_suite(suite, seed.unwrap_or(0)).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown suite {suite:?}; expected one of {}",
            SUITES.join(", ")
        ))
    })?;
    let out = out.map_or_else(|| PathBuf::from("out"), Path::to_owned);
    write(
        &out.join(format!("{suite}.json")),
        to_json(&report).as_bytes(),
    )?;
    println!("{}", report.headline());
    if let Some(f) = report.first_failure() {
        eprintln!("first failure: {f}");
    }
    Ok(report.passed)
}

/// Recomputes the summary of a stored trace and compares it with the stored
/// summary byte for byte. With a config, also reruns it and compares hashes.
pub fn cmd_replay(
    trace: Option<&Path>,
    summary: Option<&Path>,
    config: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<bool, CliError> {
    let out = out.map_or_else(|| PathBuf::from("out"), Path::to_owned);
    let trace_path = trace.map_or_else(|| out.join("trace.jsonl"), Path::to_owned);
    let summary_path = summary.map_or_else(|| out.join("summary.json"), Path::to_owned);
    let file = fs::File::open(&trace_path).map_err(io(&trace_path))?;
    let events = read_jsonl(BufReader::new(file))
        .map_err(|e| CliError::Usage(format!("{}: {e}", trace_path.display())))?;
    let replayed = summarize(&events, &initial_placement(&events));
    let stored = fs::read_to_string(&summary_path).map_err(io(&summary_path))?;
    println!("{}", summary_line(&replayed));
    let mut ok = true;
    if to_json(&replayed) != stored {
        eprintln!("replayed summary differs from {}", summary_path.display());
        ok = false;
    }
    if let Some(config) = config {
        let inst = RunConfig::load(config)?.resolve(seed)?;
        let Faults::Fixed(schedule) = &inst.faults else {
            return Err(CliError::Usage(
                "cannot replay an exhaustive fault spec".into(),
            ));
        };
        let o = execute(&inst, schedule.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
        if o.summary.trace_hash != replayed.trace_hash {
            eprintln!(
                "rerun hash {} differs from trace hash {}",
                o.summary.trace_hash, replayed.trace_hash
            );
            ok = false;
        }
    }
    Ok(ok)
}
