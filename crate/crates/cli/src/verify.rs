//! `verify`: run a check suite and write its reports.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use graphnls::fem::FemSpace;
use graphnls::graph::{build_standard, GraphKind};
use graphnls::verification::{estimate_gn_constant, negative_controls, run_suite, CheckReport, Suite, SuiteInput};
use graphnls::{Error, Graph};
use serde::Serialize;

use crate::context::{load_graph, usage, Ctx};
use crate::output::{to_json, write, RunManifest};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// identities | bounds | levels | small-mass | negative-energy | periodic | all
    #[arg(long, value_parser = parse_suite)]
    pub suite: Suite,
    /// Graph file; identities and periodic do not need one.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Nonlinearity exponent p.
    #[arg(long)]
    pub p: Option<f64>,
    /// Prescribed mass.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Nonlinearity strength rho in (0, 1].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Ladder truncations for the periodic suite.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<usize>>,
    /// Samples of the Gagliardo-Nirenberg estimate run with the bounds suite.
    #[arg(long, default_value_t = 200)]
    pub gn_samples: usize,
    /// Also run the negative controls.
    #[arg(long)]
    pub controls: bool,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct VerifyReport {
    manifest: RunManifest,
    suite: String,
    passed: bool,
    n_reports: usize,
    n_failed: usize,
    n_flagged_failures: usize,
    reports: Vec<CheckReport>,
}

fn needs_graph(suite: Suite) -> bool {
    !matches!(suite, Suite::Identities | Suite::Periodic)
}

/// Gagliardo-Nirenberg estimate on a uniform mesh of `g`; a flagged skip when
/// the inequality does not apply.
fn gn_report(g: &Graph, p: f64, samples: usize, seed: u64) -> Result<CheckReport> {
    let h = 0.02f64.min(g.min_edge_length() / 2.5);
    let space = FemSpace::build(g, h, 20.0)?;
    match estimate_gn_constant(&space, p, samples, seed, &[]) {
        Ok(est) => Ok(est.report),
        Err(Error::UnsupportedTopology(msg)) => Ok(CheckReport::at_most("gn_constant", f64::NAN, 0.0, 0.0)
            .with("skipped", msg)
            .flag()),
        Err(e) => Err(e.into()),
    }
}

/// Returns whether every unflagged report passed.
pub fn run(args: &VerifyArgs, ctx: &Ctx) -> Result<bool> {
    let p = ctx.p(args.p)?;
    let mu = ctx.mu(args.mu)?;
    let rho = ctx.rho(args.rho);
    let (g, mut manifest) = match &args.graph {
        Some(path) => {
            let (g, bytes) = load_graph(path)?;
            (g, RunManifest::new().with_graph(path, &bytes))
        }
        None if needs_graph(args.suite) => return Err(usage(format!("--graph is required for the {} suite", args.suite))),
        None => (build_standard(&GraphKind::Line)?, RunManifest::new()),
    };
    let mut input = SuiteInput::new(p, mu)?;
    input.rho = rho;
    input.opts.solver = ctx.solver();
    if let Some(cells) = &args.ladder {
        input.ladder_cells = cells.clone();
    }
    let mut reports = run_suite(args.suite, &g, &input)?;
    if matches!(args.suite, Suite::Bounds | Suite::All) && args.graph.is_some() {
        reports.push(gn_report(&g, p, args.gn_samples, ctx.seed_rng)?);
    }
    if args.controls {
        reports.extend(negative_controls()?);
    }
    for r in &reports {
        eprintln!("{r}");
    }
    let n_failed = reports.iter().filter(|r| !r.acceptable()).count();
    let n_flagged_failures = reports.iter().filter(|r| r.flagged && !r.passed).count();
    manifest = manifest
        .solver(&input.opts.solver)
        .param("suite", args.suite.to_string())
        .param("p", p)
        .param("mu", mu)
        .param("rho", rho)
        .param("ladder", &input.ladder_cells)
        .param("gn_samples", args.gn_samples)
        .param("seed_rng", ctx.seed_rng)
        .param("controls", args.controls);
    let report = VerifyReport {
        manifest,
        suite: args.suite.to_string(),
        passed: n_failed == 0,
        n_reports: reports.len(),
        n_failed,
        n_flagged_failures,
        reports,
    };
    let text = to_json(&report)?;
    match &args.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "{}: {} reports, {} failed, {} flagged",
        report.suite, report.n_reports, n_failed, n_flagged_failures
    );
    Ok(report.passed)
}
