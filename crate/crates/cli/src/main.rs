//! `graphnls`: normalized NLS solutions on metric graphs from the command line.

mod config;
mod context;
mod graph_cmd;
mod mplevel;
mod output;
mod soliton_cmd;
mod solve;
mod sweep;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::config::FileConfig;
use crate::context::{Ctx, Usage};

/// Exit code when `verify` finds a failing unflagged check or a sweep point fails.
const CHECKS_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "graphnls", version, about = "Normalized solutions of the NLS equation on metric graphs")]
struct Cli {
    /// Worker threads for sweep and verify (default: all cores).
    #[arg(long, global = true, env = "GRAPHNLS_JOBS")]
    jobs: Option<usize>,
    /// Seed of every random draw.
    #[arg(long, global = true)]
    seed_rng: Option<u64>,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate or build graph files.
    #[command(subcommand)]
    Graph(graph_cmd::GraphCmd),
    /// Closed-form soliton on the line.
    Soliton(soliton_cmd::SolitonArgs),
    /// One stationary solution of prescribed mass.
    Solve(solve::SolveArgs),
    /// Mountain-pass level estimates.
    Mplevel(mplevel::MplevelArgs),
    /// solve or mplevel over a parameter grid.
    Sweep(sweep::SweepArgs),
    /// Run a check suite.
    Verify(verify::VerifyArgs),
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let jobs = cli.jobs.or(cfg.jobs).unwrap_or(0);
    let ctx = Ctx {
        seed_rng: cli.seed_rng.or(cfg.seed_rng).unwrap_or(0),
        cfg,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    pool.install(|| match &cli.command {
        Command::Graph(cmd) => graph_cmd::run(cmd).map(|_| ExitCode::SUCCESS),
        Command::Soliton(args) => soliton_cmd::run(args, &ctx).map(|_| ExitCode::SUCCESS),
        Command::Solve(args) => solve::run(args, &ctx).map(|_| ExitCode::SUCCESS),
        Command::Mplevel(args) => mplevel::run(args, &ctx).map(|_| ExitCode::SUCCESS),
        Command::Sweep(args) => sweep::run(args, &ctx).map(|failed| {
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                eprintln!("{failed} of {} grid points failed", args.values.len());
                ExitCode::from(CHECKS_FAILED)
            }
        }),
        Command::Verify(args) => verify::run(args, &ctx).map(|passed| {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(CHECKS_FAILED)
            }
        }),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => match e.downcast_ref::<Usage>() {
            Some(u) => {
                eprintln!("error: {u}\n\nFor more information, try '--help'.");
                ExitCode::from(2)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
