//! `mplevel`: explicit path, its upper bound and the relaxed min-max level.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use graphnls::mountain_pass::{
    build_path, check_endpoints, minmax_relax, path_max_energy, path_space, Grading, MPConfig, PathKind,
};
use graphnls::soliton::line_and_halfline_levels;
use graphnls::{Graph, MountainPassConfig};
use serde::Serialize;

use crate::context::{require_graph, usage, Ctx, ProblemArgs};
use crate::output::{fmt17, to_json, RunManifest, Sink};

#[derive(Args, Clone, Debug, Default)]
pub struct MpFlags {
    /// auto | line | pendant | signpost | edge:ID
    #[arg(long)]
    pub path: Option<String>,
    /// Number of beads on the path.
    #[arg(long)]
    pub beads: Option<usize>,
    /// Relaxation iterations (0 keeps the explicit path).
    #[arg(long)]
    pub relax: Option<usize>,
}

#[derive(Args, Debug)]
pub struct MplevelArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub flags: MpFlags,
    /// Write PREFIX.json and PREFIX.beads.csv instead of printing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MpParams {
    pub p: f64,
    pub mu: f64,
    pub rho: f64,
    pub h: Option<f64>,
    #[serde(rename = "L")]
    pub halfline_len: f64,
    pub path: String,
    pub beads: usize,
    pub relax: usize,
}

impl MpParams {
    pub fn resolve(problem: &ProblemArgs, flags: &MpFlags, ctx: &Ctx) -> Result<Self> {
        let c = &ctx.cfg;
        let prm = MpParams {
            p: ctx.p(problem.p)?,
            mu: ctx.mu(problem.mu)?,
            rho: ctx.rho(problem.rho),
            h: ctx.h(problem.h),
            halfline_len: ctx.halfline_len(problem.halfline_len),
            path: flags.path.clone().or_else(|| c.path.clone()).unwrap_or_else(|| "auto".into()),
            beads: flags.beads.or(c.beads).unwrap_or(64),
            relax: flags.relax.or(c.relax).unwrap_or(40),
        };
        prm.kind()?;
        Ok(prm)
    }

    fn kind(&self) -> Result<PathKind> {
        self.path.parse().map_err(|e| usage(format!("{e}")))
    }

    pub fn config(&self) -> Result<MountainPassConfig> {
        Ok(MPConfig::new(self.p)?.with_beads(self.beads).with_relax_iters(self.relax))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EndpointChecks {
    pub start: bool,
    pub end: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MpLevel {
    pub path: String,
    /// Maximum energy over the explicit path.
    pub upper_bound: f64,
    /// Both endpoint checks hold, so `upper_bound` bounds the level from above.
    pub valid_bound: bool,
    pub relaxed_level: Option<f64>,
    pub relaxed_bead_level: Option<f64>,
    pub argmax_index: usize,
    pub endpoint_checks: EndpointChecks,
    pub relaxation_stalled: Option<bool>,
    pub relaxation_iterations: usize,
    pub eps: f64,
    pub delta: f64,
    pub c_line: f64,
    pub c_halfline: f64,
    #[serde(skip)]
    pub beads_csv: String,
    #[serde(skip)]
    pub space: Option<std::sync::Arc<graphnls::Space>>,
}

pub fn mplevel(g: &Graph, prm: &MpParams) -> Result<MpLevel> {
    let cfg = prm.config()?;
    let mut grading = Grading {
        halfline_len: prm.halfline_len,
        ..Grading::default()
    };
    if let Some(h) = prm.h {
        grading.h_max = h;
    }
    let kind = graphnls::mountain_pass::resolve_kind(g, prm.kind()?)?;
    let space = path_space(g, kind, prm.mu, prm.rho, &cfg, &grading)?;
    let path = build_path(&space, kind, prm.mu, prm.rho, &cfg)?;
    let initial = path_max_energy(&path);
    let (start, end) = check_endpoints(&path);
    let (c_line, c_halfline) = line_and_halfline_levels(prm.p, prm.mu, prm.rho)?;
    let e0 = path.energies();
    let mut csv = String::from("bead,t_initial,energy_initial,t_relaxed,energy_relaxed\n");
    let mut out = MpLevel {
        path: kind.to_string(),
        upper_bound: initial.level,
        valid_bound: initial.valid_bound,
        relaxed_level: None,
        relaxed_bead_level: None,
        argmax_index: initial.argmax,
        endpoint_checks: EndpointChecks { start, end },
        relaxation_stalled: None,
        relaxation_iterations: 0,
        eps: path.eps,
        delta: path.delta,
        c_line,
        c_halfline,
        beads_csv: String::new(),
        space: Some(space.clone()),
    };
    if prm.relax > 0 {
        let r = minmax_relax(&path, &cfg)?;
        let e1 = r.path.energies();
        for (i, ((t0, a), (t1, b))) in path.ts.iter().zip(&e0).zip(r.path.ts.iter().zip(&e1)).enumerate() {
            csv.push_str(&format!("{i},{},{},{},{}\n", fmt17(*t0), fmt17(*a), fmt17(*t1), fmt17(*b)));
        }
        out.relaxed_level = Some(r.level);
        out.relaxed_bead_level = Some(r.bead_level);
        out.argmax_index = r.argmax;
        out.relaxation_stalled = Some(r.stalled);
        out.relaxation_iterations = r.iterations;
    } else {
        for (i, (t, e)) in path.ts.iter().zip(&e0).enumerate() {
            csv.push_str(&format!("{i},{},{},,\n", fmt17(*t), fmt17(*e)));
        }
    }
    out.beads_csv = csv;
    Ok(out)
}

#[derive(Serialize)]
struct Report<'a> {
    manifest: RunManifest,
    beads_csv: Option<String>,
    #[serde(flatten)]
    level: &'a MpLevel,
}

pub fn run(args: &MplevelArgs, ctx: &Ctx) -> Result<()> {
    let (g, manifest) = require_graph(&args.problem.graph)?;
    let prm = MpParams::resolve(&args.problem, &args.flags, ctx)?;
    let level = mplevel(&g, &prm)?;
    let sink = Sink::new(args.out.clone());
    let mut manifest = manifest.param("mplevel", &prm);
    if let Some(space) = &level.space {
        manifest = manifest.mesh(space, true);
    }
    let report = Report {
        manifest,
        beads_csv: sink.csv_name(".beads.csv"),
        level: &level,
    };
    sink.json(&to_json(&report)?)?;
    if args.out.is_some() {
        sink.csv(".beads.csv", &level.beads_csv)?;
    }
    Ok(())
}
