//! `solve`: one stationary solution on a graph file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{Context as _, Result};
use clap::{Args, ValueEnum};
use graphnls::fem::{distance_from_vertex, ChainKind, FemSpace};
use graphnls::graph::distances_from;
use graphnls::mountain_pass::PathKind;
use graphnls::soliton::{exponents_and_lambda, Soliton};
use graphnls::solver::{explicit_even_halfline_solution, gradient_flow_normalized, nehari_minimize, newton_constrained};
use graphnls::verification::{
    check_linfty_bound, check_mass_invariant, check_positivity, explicit_space, mountain_pass_solution, CheckReport,
    PipelineOptions,
};
use graphnls::{Config, Function, Graph, Solution, Space};
use serde::Serialize;
use serde_json::Value;

use crate::context::{require_graph, usage, Ctx, ProblemArgs};
use crate::output::{to_json, Sink};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Mass-constrained Newton from a seed.
    Newton,
    /// Normalized gradient flow from a seed, polished by Newton.
    Flow,
    /// Nehari-manifold minimization at fixed --lambda (rho = 1).
    Nehari,
    /// Explicit solution on graphs with an even number of half-lines per vertex.
    Explicit,
    /// Path construction, min-max relaxation and rho-continuation.
    MountainPass,
}

impl FromStr for Method {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        <Method as ValueEnum>::from_str(s, false).map_err(|_| usage(format!("unknown method {s:?}")))
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct SolveFlags {
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// soliton-at-vertex:NAME | soliton-on-edge:ID (ID like e0 or h1) | constant | file:PATH
    #[arg(long)]
    pub seed: Option<String>,
    /// Frequency for the nehari and explicit methods.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub flags: SolveFlags,
    /// Write PREFIX.json and PREFIX.csv instead of printing the summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved inputs of one solve.
#[derive(Clone, Debug, Serialize)]
pub struct SolveParams {
    pub p: f64,
    pub mu: Option<f64>,
    pub rho: f64,
    pub lambda: Option<f64>,
    pub h: Option<f64>,
    #[serde(rename = "L")]
    pub halfline_len: f64,
    pub method: Method,
    pub seed: Option<String>,
    #[serde(skip)]
    pub solver: Config,
}

impl SolveParams {
    pub fn resolve(problem: &ProblemArgs, flags: &SolveFlags, ctx: &Ctx) -> Result<Self> {
        let method = match (flags.method, &ctx.cfg.method) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse()?,
            (None, None) => Method::Newton,
        };
        Ok(SolveParams {
            p: ctx.p(problem.p)?,
            mu: ctx.mu_opt(problem.mu),
            rho: ctx.rho(problem.rho),
            lambda: ctx.lambda(flags.lambda),
            h: ctx.h(problem.h),
            halfline_len: ctx.halfline_len(problem.halfline_len),
            method,
            seed: flags.seed.clone().or_else(|| ctx.cfg.seed.clone()),
            solver: ctx.solver(),
        })
    }

    fn mu(&self) -> Result<f64> {
        self.mu.ok_or_else(|| usage(format!("--mu is required for the {:?} method", self.method)))
    }

    fn lambda(&self) -> Result<f64> {
        self.lambda
            .ok_or_else(|| usage(format!("--lambda is required for the {:?} method", self.method)))
    }

    fn unit_rho(&self) -> Result<()> {
        if self.rho == 1.0 {
            Ok(())
        } else {
            Err(usage(format!("the {:?} method works at rho = 1", self.method)))
        }
    }

    /// The soliton whose shape seeds and sizes the mesh.
    fn soliton(&self) -> Result<Soliton<f64>> {
        let lambda = match (self.lambda, self.mu) {
            (Some(l), _) => l,
            (None, Some(mu)) if self.p != 6.0 => exponents_and_lambda(self.p, mu, self.rho)?.2,
            _ => 1.0,
        };
        Ok(Soliton::from_lambda(self.p, lambda, self.rho)?)
    }

    fn uniform_space(&self, g: &Graph) -> Result<Arc<Space>> {
        let h = match self.h {
            Some(h) => h,
            None => 0.05f64.min(self.soliton()?.width() / 20.0).min(g.min_edge_length() / 2.5),
        };
        Ok(FemSpace::build(g, h, self.halfline_len)?)
    }
}

pub struct SolveOutcome {
    pub solution: Solution,
    pub graded: bool,
    pub extra: BTreeMap<String, Value>,
}

pub fn solve(g: &Graph, prm: &SolveParams) -> Result<SolveOutcome> {
    let mut extra = BTreeMap::new();
    let cfg = &prm.solver;
    let mut graded = false;
    let solution = match prm.method {
        Method::Newton | Method::Flow => {
            let mu = prm.mu()?;
            let space = prm.uniform_space(g)?;
            let seed = make_seed(&space, prm)?.project_mass(mu)?;
            if prm.method == Method::Newton {
                newton_constrained(&seed, mu, prm.rho, prm.p, cfg)?
            } else {
                gradient_flow_normalized(&seed, mu, prm.rho, prm.p, cfg)?
            }
        }
        Method::Nehari => {
            prm.unit_rho()?;
            let lambda = prm.lambda()?;
            let space = prm.uniform_space(g)?;
            let seeds = match prm.seed {
                Some(_) => Some(vec![make_seed(&space, prm)?]),
                None => None,
            };
            let n = nehari_minimize(&space, lambda, prm.p, seeds, cfg)?;
            extra.insert("nehari_level".into(), n.level.into());
            extra.insert("restarts".into(), n.restarts.into());
            n.solution
        }
        Method::Explicit => {
            prm.unit_rho()?;
            let lambda = prm.lambda()?;
            let space = match prm.h {
                Some(_) => prm.uniform_space(g)?,
                None => explicit_space(g, lambda, prm.p, 40.0, prm.halfline_len)?,
            };
            let ex = explicit_even_halfline_solution(&space, lambda, prm.p)?;
            extra.insert("tau".into(), ex.tau.into());
            extra.insert("core_value".into(), ex.core_value.into());
            extra.insert("mass_formula".into(), ex.mass_formula.into());
            extra.insert("energy_formula".into(), ex.energy_formula.into());
            ex.solution
        }
        Method::MountainPass => {
            prm.unit_rho()?;
            let mut opts = PipelineOptions::new(prm.p)?;
            opts.solver = cfg.clone();
            opts.grading.halfline_len = prm.halfline_len;
            if let Some(h) = prm.h {
                opts.grading.h_max = h;
            }
            let run = mountain_pass_solution(g, prm.p, prm.mu()?, &opts)?;
            graded = true;
            extra.insert("path".into(), run.kind.to_string().into());
            extra.insert("initial_level".into(), run.initial_level.into());
            extra.insert("initial_valid".into(), run.initial_valid.into());
            extra.insert("relaxed_level".into(), run.relaxed_level.into());
            extra.insert("relaxation_stalled".into(), run.stalled.into());
            extra.insert("continuation_steps".into(), run.chain.len().into());
            run.solution().clone()
        }
    };
    Ok(SolveOutcome { solution, graded, extra })
}

/// Seed named by `prm.seed`, defaulting to a soliton centred at the first
/// vertex without a Dirichlet condition.
pub fn make_seed(space: &Arc<Space>, prm: &SolveParams) -> Result<Function> {
    let g = space.mesh().graph();
    let spec = match &prm.seed {
        Some(s) => s.clone(),
        None => {
            let v = (0..g.n_vertices()).find(|&v| !g.is_dirichlet(v)).unwrap_or(0);
            format!("soliton-at-vertex:{}", g.vertex_names()[v])
        }
    };
    if spec == "constant" {
        let w = prm.soliton()?.width().max(1.0);
        return Ok(Function::from_fn(space.clone(), |kind, x| match kind {
            ChainKind::Edge(_) => 1.0,
            ChainKind::HalfLine(_) => (-x / w).exp(),
        }));
    }
    if let Some(name) = spec.strip_prefix("soliton-at-vertex:") {
        let v = g
            .vertex_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| usage(format!("graph has no vertex {name:?}")))?;
        let s = prm.soliton()?;
        return Ok(distance_from_vertex(space, v).map(|d| s.eval(d)));
    }
    if let Some(id) = spec.strip_prefix("soliton-on-edge:") {
        let PathKind::Edge(target) = PathKind::from_str(&format!("edge:{id}"))? else {
            unreachable!("edge paths parse to edges")
        };
        return soliton_on_chain(space, target, &prm.soliton()?);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return seed_from_file(space, Path::new(path));
    }
    Err(usage(format!("unknown seed {spec:?}")))
}

/// Soliton centred at the midpoint of an edge, or a few widths out along a half-line.
fn soliton_on_chain(space: &Arc<Space>, target: ChainKind, s: &Soliton<f64>) -> Result<Function> {
    let mesh = space.mesh();
    let ch = mesh
        .chains()
        .iter()
        .find(|c| c.kind == target)
        .ok_or_else(|| usage(format!("graph has no edge {}", target.label())))?;
    let centre = match ch.end_vertex {
        Some(_) => ch.length / 2.0,
        None => (3.0 * s.width()).min(ch.length / 2.0),
    };
    let mut sources = vec![(ch.start_vertex, centre)];
    if let Some(e) = ch.end_vertex {
        sources.push((e, ch.length - centre));
    }
    let dist = distances_from(mesh.graph(), &sources);
    let chains = mesh.chains().to_vec();
    Ok(Function::from_fn(space.clone(), move |kind, x| {
        let c = chains.iter().find(|c| c.kind == kind).unwrap();
        let mut d = dist[c.start_vertex] + x;
        if let Some(e) = c.end_vertex {
            d = d.min(dist[e] + c.length - x);
        }
        if kind == target {
            d = d.min((x - centre).abs());
        }
        s.eval(d)
    }))
}

/// Linear interpolation of a CSV with columns `edge_id,local_coordinate,value`.
fn seed_from_file(space: &Arc<Space>, path: &Path) -> Result<Function> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading seed {}", path.display()))?;
    let mut by_chain: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in reader.deserialize::<(String, f64, f64)>() {
        let (label, x, v) = row.with_context(|| format!("parsing seed {}", path.display()))?;
        by_chain.entry(label).or_default().push((x, v));
    }
    for rows in by_chain.values_mut() {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let labels: Vec<String> = space.mesh().chains().iter().map(|c| c.kind.label()).collect();
    if !labels.iter().any(|l| by_chain.contains_key(l)) {
        anyhow::bail!("seed {} shares no edge id with the graph", path.display());
    }
    Ok(Function::from_fn(space.clone(), move |kind, x| {
        by_chain.get(&kind.label()).map_or(0.0, |rows| interpolate(rows, x))
    }))
}

fn interpolate(rows: &[(f64, f64)], x: f64) -> f64 {
    let k = rows.partition_point(|r| r.0 <= x);
    if k == 0 {
        return rows[0].1;
    }
    if k == rows.len() {
        return rows[k - 1].1;
    }
    let ((x0, y0), (x1, y1)) = (rows[k - 1], rows[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Cheap checks attached to every solve summary.
pub fn summary_checks(sol: &Solution, g: &Graph) -> Vec<CheckReport> {
    vec![
        check_mass_invariant(sol),
        check_positivity(sol),
        check_linfty_bound(sol, g.min_edge_length()),
    ]
}

#[derive(Serialize)]
struct SolveReport<'a> {
    manifest: crate::output::RunManifest,
    method: Method,
    solution_csv: Option<String>,
    summary: graphnls::solver::SolutionSummary,
    extra: &'a BTreeMap<String, Value>,
    checks: Vec<CheckReport>,
}

pub fn run(args: &SolveArgs, ctx: &Ctx) -> Result<()> {
    let (g, manifest) = require_graph(&args.problem.graph)?;
    let prm = SolveParams::resolve(&args.problem, &args.flags, ctx)?;
    let out = solve(&g, &prm)?;
    let sol = &out.solution;
    let sink = Sink::new(args.out.clone());
    let report = SolveReport {
        manifest: manifest
            .mesh(sol.u.space(), out.graded)
            .solver(&prm.solver)
            .param("solve", &prm),
        method: prm.method,
        solution_csv: sink.csv_name(".csv"),
        summary: sol.summary(),
        extra: &out.extra,
        checks: summary_checks(sol, &g),
    };
    sink.json(&to_json(&report)?)?;
    if args.out.is_some() {
        sink.csv(".csv", &sol.u.to_csv())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_clamps_and_blends() {
        let rows = [(0.0, 1.0), (1.0, 3.0)];
        assert_eq!(interpolate(&rows, -1.0), 1.0);
        assert_eq!(interpolate(&rows, 0.5), 2.0);
        assert_eq!(interpolate(&rows, 2.0), 3.0);
    }

    #[test]
    fn methods_parse() {
        assert_eq!("mountain-pass".parse::<Method>().unwrap(), Method::MountainPass);
        assert!("simplex".parse::<Method>().is_err());
    }
}
