use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dispersim_cli::commands::{cmd_replay, cmd_run, cmd_sweep, cmd_verify};
use dispersim_cli::suites::SUITES;

/// Crash-tolerant dispersion of mobile robots on anonymous graphs.
///
/// Exit status: 0 when every check passed, 1 on a verification failure,
/// 2 on a usage or config error.
#[derive(Debug, Parser)]
#[command(name = "dispersim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and suites [default: all cores].
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Seed for random placements and crash schedules.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its trace and summary.
    Run,
    /// Run a parameter grid and write one CSV row per point.
    Sweep,
    /// Run a verification suite and write its report.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
    },
    /// Recompute a stored trace's summary and compare.
    Replay {
        /// Trace to replay [default: <out>/trace.jsonl].
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Summary to compare against [default: <out>/summary.json].
        #[arg(long, value_name = "PATH")]
        summary: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("thread pool is configured once");
    }
    let (config, out) = (cli.config.as_deref(), cli.out.as_deref());
    let result = match &cli.command {
        Command::Run => cmd_run(config, out, cli.seed),
        Command::Sweep => cmd_sweep(config, out, cli.seed),
        Command::Verify { suite } => cmd_verify(suite, out, cli.seed),
        Command::Replay { trace, summary } => {
            cmd_replay(trace.as_deref(), summary.as_deref(), config, out, cli.seed)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
