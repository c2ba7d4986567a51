//! `sweep`: solve or mplevel over a mu- or rho-grid, aggregated into one CSV.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::context::{require_graph, usage, Ctx, ProblemArgs};
use crate::mplevel::{mplevel, MpFlags, MpParams};
use crate::output::{fmt17, to_json, Sink};
use crate::solve::{solve, SolveFlags, SolveParams};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Solve,
    Mplevel,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Mu,
    Rho,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Subcommand run at every grid point.
    #[arg(long, value_enum)]
    pub run: Target,
    /// Parameter varied along the grid.
    #[arg(long, value_enum)]
    pub over: Axis,
    /// Grid values, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solve: SolveFlags,
    #[command(flatten)]
    pub mp: MpFlags,
    /// Write PREFIX.csv and PREFIX.json instead of printing the CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const SOLVE_COLUMNS: [&str; 9] = [
    "lambda",
    "energy",
    "mass",
    "residual",
    "relative_residual",
    "positive",
    "sup",
    "min",
    "iterations",
];

const MP_COLUMNS: [&str; 9] = [
    "upper_bound",
    "valid_bound",
    "relaxed_level",
    "argmax_index",
    "start_ok",
    "end_ok",
    "stalled",
    "c_line",
    "c_halfline",
];

/// Status, measured columns and an error message for one grid point.
type Row = (bool, Vec<String>, String);

fn bool_cell(b: bool) -> String {
    b.to_string()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt17)
}

/// Returns `(csv, n_failed)`.
pub fn sweep(args: &SweepArgs, ctx: &Ctx, g: &graphnls::Graph) -> Result<(String, usize, serde_json::Value)> {
    let mut problem = args.problem.clone();
    // fill the swept parameter so resolution does not demand it
    match args.over {
        Axis::Mu => problem.mu = Some(args.values[0]),
        Axis::Rho => problem.rho = Some(args.values[0]),
    }
    let rows: Vec<Row>;
    let params: serde_json::Value;
    let columns: &[&str];
    match args.run {
        Target::Solve => {
            let base = SolveParams::resolve(&problem, &args.solve, ctx)?;
            params = serde_json::to_value(&base)?;
            columns = &SOLVE_COLUMNS;
            rows = args
                .values
                .par_iter()
                .map(|&v| {
                    let mut prm = base.clone();
                    match args.over {
                        Axis::Mu => prm.mu = Some(v),
                        Axis::Rho => prm.rho = v,
                    }
                    match solve(g, &prm) {
                        Ok(out) => {
                            let s = out.solution.summary();
                            let cells = vec![
                                fmt17(s.lambda),
                                fmt17(s.energy),
                                fmt17(s.mu),
                                fmt17(s.residual),
                                fmt17(s.relative_residual),
                                bool_cell(s.positive),
                                fmt17(s.sup),
                                fmt17(s.min),
                                s.iterations.to_string(),
                            ];
                            (true, cells, String::new())
                        }
                        Err(e) => (false, vec![String::new(); SOLVE_COLUMNS.len()], format!("{e:#}")),
                    }
                })
                .collect();
        }
        Target::Mplevel => {
            let base = MpParams::resolve(&problem, &args.mp, ctx)?;
            params = serde_json::to_value(&base)?;
            columns = &MP_COLUMNS;
            rows = args
                .values
                .par_iter()
                .map(|&v| {
                    let mut prm = base.clone();
                    match args.over {
                        Axis::Mu => prm.mu = v,
                        Axis::Rho => prm.rho = v,
                    }
                    match mplevel(g, &prm) {
                        Ok(l) => {
                            let cells = vec![
                                fmt17(l.upper_bound),
                                bool_cell(l.valid_bound),
                                opt_cell(l.relaxed_level),
                                l.argmax_index.to_string(),
                                bool_cell(l.endpoint_checks.start),
                                bool_cell(l.endpoint_checks.end),
                                l.relaxation_stalled.map_or_else(String::new, bool_cell),
                                fmt17(l.c_line),
                                fmt17(l.c_halfline),
                            ];
                            (true, cells, String::new())
                        }
                        Err(e) => (false, vec![String::new(); MP_COLUMNS.len()], format!("{e:#}")),
                    }
                })
                .collect();
        }
    }
    let axis = match args.over {
        Axis::Mu => "mu",
        Axis::Rho => "rho",
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![axis, "status"];
    header.extend_from_slice(columns);
    header.push("message");
    w.write_record(&header)?;
    let mut failed = 0;
    for (&v, (ok, cells, msg)) in args.values.iter().zip(rows) {
        failed += usize::from(!ok);
        let mut rec = vec![fmt17(v), if ok { "ok".into() } else { "error".into() }];
        rec.extend(cells);
        rec.push(msg);
        w.write_record(&rec)?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
    Ok((csv, failed, params))
}

#[derive(Serialize)]
struct SweepReport {
    manifest: crate::output::RunManifest,
    csv: Option<String>,
    points: usize,
    failed: usize,
}

/// Returns the number of grid points that failed.
pub fn run(args: &SweepArgs, ctx: &Ctx) -> Result<usize> {
    if args.values.iter().any(|v| !v.is_finite()) {
        return Err(usage("--values must be finite numbers"));
    }
    let (g, manifest) = require_graph(&args.problem.graph)?;
    let (csv, failed, params) = sweep(args, ctx, &g)?;
    let sink = Sink::new(args.out.clone());
    if args.out.is_some() {
        let report = SweepReport {
            manifest: manifest
                .solver(&ctx.solver())
                .param("run", args.run)
                .param("over", args.over)
                .param("values", &args.values)
                .param("base", params)
                .param("jobs", rayon::current_num_threads()),
            csv: sink.csv_name(".csv"),
            points: args.values.len(),
            failed,
        };
        sink.json(&to_json(&report)?)?;
        sink.csv(".csv", &csv)?;
    } else {
        let compact = serde_json::to_string(&manifest.param("base", params))?;
        print!("# manifest: {compact}\n{csv}");
    }
    Ok(failed)
}
