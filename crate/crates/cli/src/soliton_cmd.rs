//! `soliton`: the closed-form profile on the line.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use graphnls::soliton::SolitonParams;
use serde::Serialize;

use crate::context::{usage, Ctx};
use crate::output::{fmt17, to_json, RunManifest, Sink};

#[derive(Args, Debug)]
pub struct SolitonArgs {
    /// Nonlinearity exponent p.
    #[arg(long)]
    p: Option<f64>,
    /// Prescribed mass.
    #[arg(long)]
    mu: Option<f64>,
    /// Nonlinearity strength rho in (0, 1].
    #[arg(long)]
    rho: Option<f64>,
    /// Frequency at p = 6, where the mass does not select the profile.
    #[arg(long)]
    lambda: Option<f64>,
    /// Half-width of the table (default: 12 soliton widths).
    #[arg(long)]
    x_max: Option<f64>,
    /// Number of table rows.
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Write PREFIX.json and PREFIX.csv instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Header {
    manifest: RunManifest,
    p: f64,
    mu: f64,
    rho: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    lambda: f64,
    theta_p: f64,
    energy: f64,
    peak: f64,
    width: f64,
    table_csv: Option<String>,
}

pub fn run(args: &SolitonArgs, ctx: &Ctx) -> Result<()> {
    let p = ctx.p(args.p)?;
    let rho = ctx.rho(args.rho);
    let params = if p == 6.0 {
        SolitonParams::critical(ctx.lambda(args.lambda).unwrap_or(1.0), rho)?
    } else {
        if args.lambda.is_some() {
            return Err(usage("--lambda only applies at p = 6; give --mu instead"));
        }
        SolitonParams::new(p, ctx.mu(args.mu)?, rho)?
    };
    if args.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let s = &params.soliton;
    let x_max = args.x_max.unwrap_or(12.0 * s.width());
    if x_max.is_nan() || x_max <= 0.0 {
        return Err(usage("--x-max must be positive"));
    }
    let sink = Sink::new(args.out.clone());
    let header = Header {
        manifest: RunManifest::new()
            .param("p", p)
            .param("mu", params.mu)
            .param("rho", rho)
            .param("x_max", x_max)
            .param("points", args.points),
        p,
        mu: params.mu,
        rho,
        alpha: params.alpha,
        beta: params.beta,
        lambda: params.lambda,
        theta_p: params.theta,
        energy: s.energy(),
        peak: params.peak,
        width: s.width(),
        table_csv: sink.csv_name(".csv"),
    };
    let mut table = String::from("x,value,derivative\n");
    for i in 0..args.points {
        let x = -x_max + 2.0 * x_max * i as f64 / (args.points - 1) as f64;
        table.push_str(&format!("{},{},{}\n", fmt17(x), fmt17(s.eval(x)), fmt17(s.deriv(x))));
    }
    let json = to_json(&header)?;
    if args.out.is_some() {
        sink.json(&json)?;
        sink.csv(".csv", &table)
    } else {
        for line in json.lines() {
            println!("# {line}");
        }
        print!("{table}");
        Ok(())
    }
}
