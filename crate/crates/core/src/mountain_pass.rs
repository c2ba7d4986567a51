//! Fixed-mass paths, explicit candidate paths and min-max relaxation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{ChainKind, FemSpace, Focus, GridFunction, Refinement};
use crate::graph::{MetricGraph, Stem};
use crate::linalg::{dot, ChainSolver};
use crate::scalar::{cst, to_f64, Real};
use crate::soliton::{Soliton, SolitonParams};
use crate::solver::multiplier;

/// `a_p = ((p-2)/4)^{2/(p-6)}`.
pub fn a_p<T: Real>(p: T) -> Result<T> {
    if !(p > cst(6.0)) {
        return Err(Error::InvalidParameter(format!(
            "mountain-pass paths need p > 6, got {}",
            to_f64(p)
        )));
    }
    Ok(((p - cst(2.0)) / cst(4.0)).powf(cst::<T>(2.0) / (p - cst(6.0))))
}

/// `a_p (2ρ)^{2/(p-6)}`: the scale at which `E_{1/2}` of the rescaled
/// `φ_{μ,ρ}` turns negative. Equals `a_p` at `ρ = 1/2`.
pub fn a_rho<T: Real>(p: T, rho: T) -> Result<T> {
    Ok(a_p(p)? * (cst::<T>(2.0) * rho).powf(cst::<T>(2.0) / (p - cst(6.0))))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MPConfig<T> {
    pub p: T,
    pub a_p: T,
    /// Initial path start offset; halved until both endpoint checks pass.
    pub eps: T,
    /// Radius of `A_δ`. Defaults to half the gradient norm of the start bead
    /// at the initial `eps`.
    pub delta: Option<T>,
    pub n_beads: usize,
    pub relax_iters: usize,
    /// Preconditioned descent step of the relaxation.
    pub step: T,
    pub max_backoffs: usize,
    pub max_eps_halvings: usize,
    /// Extra bead density near the top of the path.
    pub energy_weight: T,
}

impl<T: Real> MPConfig<T> {
    pub fn new(p: T) -> Result<Self> {
        Ok(MPConfig {
            p,
            a_p: a_p(p)?,
            eps: cst(0.5),
            delta: None,
            n_beads: 64,
            relax_iters: 60,
            step: cst(0.3),
            max_backoffs: 12,
            max_eps_halvings: 20,
            energy_weight: cst(20.0),
        })
    }

    pub fn with_beads(mut self, n: usize) -> Self {
        self.n_beads = n;
        self
    }

    pub fn with_relax_iters(mut self, n: usize) -> Self {
        self.relax_iters = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let exact = a_p(self.p)?;
        if self.a_p != exact {
            return Err(Error::Configuration(format!(
                "a_p = {} does not match ((p-2)/4)^(2/(p-6)) = {}",
                to_f64(self.a_p),
                to_f64(exact)
            )));
        }
        if !(self.eps > T::zero() && self.eps < self.a_p) {
            return Err(Error::Configuration("eps must lie in (0, a_p)".into()));
        }
        if self.n_beads < 16 {
            return Err(Error::Configuration("at least 16 beads are required".into()));
        }
        if let Some(d) = self.delta {
            if !(d > T::zero()) {
                return Err(Error::Configuration("delta must be positive".into()));
            }
        }
        if !(self.step > T::zero()) {
            return Err(Error::Configuration("relaxation step must be positive".into()));
        }
        Ok(())
    }
}

/// Which explicit path to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    /// Pick from the topology: pendant, then signpost, then line, then the
    /// most interior longest edge, then a half-line.
    Auto,
    /// Rescaled soliton on the line, or its mass-`2μ` restriction on the
    /// half-line.
    Line,
    /// Soliton centred on one edge or truncated half-line with linear tapers.
    Edge(ChainKind),
    Pendant,
    Signpost,
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathKind::Auto => write!(f, "auto"),
            PathKind::Line => write!(f, "line"),
            PathKind::Edge(c) => write!(f, "edge:{}", c.label()),
            PathKind::Pendant => write!(f, "pendant"),
            PathKind::Signpost => write!(f, "signpost"),
        }
    }
}

impl FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(PathKind::Auto),
            "line" => Ok(PathKind::Line),
            "pendant" => Ok(PathKind::Pendant),
            "signpost" => Ok(PathKind::Signpost),
            _ => {
                let id = s
                    .strip_prefix("edge:")
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown path kind {s:?}")))?;
                let bad = || Error::InvalidParameter(format!("bad edge id {id:?}"));
                let chain = if let Some(h) = id.strip_prefix('h') {
                    ChainKind::HalfLine(h.parse().map_err(|_| bad())?)
                } else {
                    ChainKind::Edge(id.trim_start_matches('e').parse().map_err(|_| bad())?)
                };
                Ok(PathKind::Edge(chain))
            }
        }
    }
}

/// Resolves [`PathKind::Auto`] and validates the others against `g`.
pub fn resolve_kind<T: Real>(g: &MetricGraph<T>, kind: PathKind) -> Result<PathKind> {
    let only_halflines = g.edges().is_empty() && g.n_vertices() == 1;
    match kind {
        PathKind::Auto => {
            if !g.pendants().is_empty() {
                return Ok(PathKind::Pendant);
            }
            if !g.signposts().is_empty() {
                return Ok(PathKind::Signpost);
            }
            if only_halflines && g.halflines().len() <= 2 && !g.is_dirichlet(0) {
                return Ok(PathKind::Line);
            }
            if let Some(e) = interior_edge(g) {
                return Ok(PathKind::Edge(ChainKind::Edge(e)));
            }
            if !g.halflines().is_empty() {
                return Ok(PathKind::Edge(ChainKind::HalfLine(0)));
            }
            Err(Error::UnsupportedTopology("graph has no edge to support a path".into()))
        }
        PathKind::Line => {
            if only_halflines && (1..=2).contains(&g.halflines().len()) && !g.is_dirichlet(0) {
                Ok(kind)
            } else {
                Err(Error::UnsupportedTopology(
                    "the line path needs the line or the half-line graph".into(),
                ))
            }
        }
        PathKind::Edge(ChainKind::Edge(i)) if i < g.edges().len() && !g.edges()[i].is_loop() => Ok(kind),
        PathKind::Edge(ChainKind::HalfLine(i)) if i < g.halflines().len() => Ok(kind),
        PathKind::Edge(c) => Err(Error::InvalidParameter(format!(
            "{} is not a bounded non-loop edge or half-line of the graph",
            c.label()
        ))),
        PathKind::Pendant => {
            if g.pendants().is_empty() {
                Err(Error::UnsupportedTopology("graph has no pendant".into()))
            } else {
                Ok(kind)
            }
        }
        PathKind::Signpost => {
            if g.signposts().is_empty() {
                Err(Error::UnsupportedTopology("graph has no signpost".into()))
            } else {
                Ok(kind)
            }
        }
    }
}

/// Longest non-loop edge, ties broken by distance from Dirichlet vertices and
/// half-line attachments.
fn interior_edge<T: Real>(g: &MetricGraph<T>) -> Option<usize> {
    let mut ends: Vec<(usize, T)> = g.dirichlet_vertices().iter().map(|&v| (v, T::zero())).collect();
    ends.extend(g.halflines().iter().map(|&v| (v, T::zero())));
    let dist = if ends.is_empty() {
        vec![T::zero(); g.n_vertices()]
    } else {
        crate::graph::distances_from(g, &ends)
    };
    let tol = cst::<T>(1e-12);
    let mut best: Option<(usize, T, T)> = None;
    for (i, e) in g.edges().iter().enumerate() {
        if e.is_loop() {
            continue;
        }
        let depth = dist[e.u].min(dist[e.v]);
        let better = match best {
            None => true,
            Some((_, len, d)) => e.len > len * (T::one() + tol) || ((e.len - len).abs() <= tol * len && depth > d),
        };
        if better {
            best = Some((i, e.len, depth));
        }
    }
    best.map(|b| b.0)
}

/// Where the beads of `kind` concentrate, for graded meshes.
pub fn path_focus<T: Real>(g: &MetricGraph<T>, kind: PathKind, halfline_len: T) -> Result<Focus<T>> {
    let kind = resolve_kind(g, kind)?;
    Ok(match kind {
        PathKind::Auto => unreachable!(),
        PathKind::Line => Focus::Vertex(0),
        PathKind::Edge(ChainKind::Edge(i)) => Focus::Point(ChainKind::Edge(i), g.edges()[i].len / cst(2.0)),
        PathKind::Edge(c) => Focus::Point(c, halfline_len / cst(2.0)),
        PathKind::Pendant => Focus::Vertex(g.pendants()[0].1),
        PathKind::Signpost => {
            let s = g.signposts()[0];
            Focus::Point(ChainKind::Edge(s.loop_edge), g.edges()[s.loop_edge].len / cst(2.0))
        }
    })
}

/// Width `1/k` of the narrowest bead of the path, the last one.
pub fn narrowest_bead_width<T: Real>(g: &MetricGraph<T>, kind: PathKind, mu: T, rho: T, cfg: &MPConfig<T>) -> Result<T> {
    let kind = resolve_kind(g, kind)?;
    let m = if doubles_mass(g, kind) { mu * cst(2.0) } else { mu };
    let sp = SolitonParams::new(cfg.p, m, rho)?;
    Ok(sp.soliton.width() / (a_rho(cfg.p, rho)? + cfg.eps))
}

fn doubles_mass<T: Real>(g: &MetricGraph<T>, kind: PathKind) -> bool {
    matches!(kind, PathKind::Pendant) || (matches!(kind, PathKind::Line) && g.halflines().len() == 1)
}

/// Graded-mesh parameters relative to the narrowest bead.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grading<T> {
    /// Elements across one bead width at the focus.
    pub cells_per_width: T,
    pub growth: T,
    pub h_max: T,
    pub halfline_len: T,
}

impl<T: Real> Default for Grading<T> {
    fn default() -> Self {
        Grading {
            cells_per_width: cst(40.0),
            growth: cst(0.02),
            h_max: cst(0.05),
            halfline_len: cst(30.0),
        }
    }
}

/// A mesh graded toward the focus of `kind`, fine enough for the beads of
/// the path at every `ρ` between `1/2` and `rho`.
pub fn path_space<T: Real>(
    g: &MetricGraph<T>,
    kind: PathKind,
    mu: T,
    rho: T,
    cfg: &MPConfig<T>,
    grading: &Grading<T>,
) -> Result<Arc<FemSpace<T>>> {
    let mut w = narrowest_bead_width(g, kind, mu, rho, cfg)?;
    if rho > cst(0.5) {
        w = w.min(narrowest_bead_width(g, kind, mu, cst(0.5), cfg)?);
    }
    let h_max = grading.h_max.min(g.min_edge_length() / cst(2.5));
    let refine = Refinement {
        foci: vec![path_focus(g, kind, grading.halfline_len)?],
        h_min: (w / grading.cells_per_width).min(h_max),
        growth: grading.growth,
    };
    FemSpace::build_refined(g, h_max, grading.halfline_len, &refine)
}

/// An ordered list of beads of mass `μ`.
#[derive(Clone, Debug)]
pub struct PathOnSphere<T> {
    pub beads: Vec<GridFunction<T>>,
    /// Path parameter of each bead.
    pub ts: Vec<T>,
    pub mu: T,
    pub rho: T,
    pub p: T,
    pub eps: T,
    pub delta: T,
    pub kind: PathKind,
    /// `E_ρ` of the corresponding beads of the model path on ℝ (or ℝ⁺).
    pub reference: Vec<T>,
    /// The taper changed the top energy by more than 20%.
    pub short_edge: bool,
    /// Multiplier of the model soliton, used to precondition relaxation.
    pub lambda_ref: T,
}

impl<T: Real> PathOnSphere<T> {
    pub fn space(&self) -> &Arc<FemSpace<T>> {
        self.beads[0].space()
    }

    pub fn energies(&self) -> Vec<T> {
        energies_at(&self.beads, self.rho, self.p)
    }

    pub fn len(&self) -> usize {
        self.beads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beads.is_empty()
    }
}

fn energies_at<T: Real>(beads: &[GridFunction<T>], rho: T, p: T) -> Vec<T> {
    beads.par_iter().map(|b| b.energy(rho, p)).collect()
}

/// `E_ρ(√s φ(s·))` for a soliton `φ` of the same `ρ`.
fn scaled_energy<T: Real>(phi: &Soliton<T>, s: T, rho: T, p: T, halve: bool) -> T {
    let e = s * s * phi.gradsq() / cst(2.0) - rho * s.powf((p - cst(2.0)) / cst(2.0)) * phi.lpp() / p;
    if halve {
        e / cst(2.0)
    } else {
        e
    }
}

/// Builds the explicit path of `kind` on `space`, shrinking `ε` until both
/// endpoint predicates hold.
pub fn build_path<T: Real>(
    space: &Arc<FemSpace<T>>,
    kind: PathKind,
    mu: T,
    rho: T,
    cfg: &MPConfig<T>,
) -> Result<PathOnSphere<T>> {
    cfg.validate()?;
    if !(rho > T::zero() && rho <= T::one()) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {}", to_f64(rho))));
    }
    let g = space.mesh().graph();
    let kind = resolve_kind(g, kind)?;
    let mut eps = cfg.eps;
    let delta = match cfg.delta {
        Some(d) => d,
        None => sample_path(space, kind, mu, rho, eps, T::one(), cfg)?.beads[0].gradsq() / cst(2.0),
    };
    for _ in 0..=cfg.max_eps_halvings {
        let path = sample_path(space, kind, mu, rho, eps, delta, cfg)?;
        let (a, b) = check_endpoints(&path);
        if a && b {
            return Ok(path);
        }
        eps = eps / cst(2.0);
    }
    Err(Error::Configuration(format!(
        "endpoint checks still fail after {} halvings of eps",
        cfg.max_eps_halvings
    )))
}

fn sample_path<T: Real>(
    space: &Arc<FemSpace<T>>,
    kind: PathKind,
    mu: T,
    rho: T,
    eps: T,
    delta: T,
    cfg: &MPConfig<T>,
) -> Result<PathOnSphere<T>> {
    let g = space.mesh().graph().clone();
    let p = cfg.p;
    let halve = doubles_mass(&g, kind);
    let m = if halve { mu * cst(2.0) } else { mu };
    let phi = SolitonParams::new(p, m, rho)?.soliton;
    let a = a_rho(p, rho)?;
    let n = cfg.n_beads;
    let ts: Vec<T> = (0..n).map(|i| T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap()).collect();
    let hl = space.mesh().halfline_len();
    let beads: Vec<GridFunction<T>> = ts
        .par_iter()
        .map(|&t| {
            let s = a * t + eps;
            let bar = |y: T| s.sqrt() * phi.eval(s * y);
            let v = bead(&g, kind, hl, &bar);
            GridFunction::from_fn(space.clone(), v).project_mass(mu)
        })
        .collect::<Result<Vec<_>>>()?;
    let reference: Vec<T> = ts.iter().map(|&t| scaled_energy(&phi, a * t + eps, rho, p, halve)).collect();
    let energies = energies_at(&beads, rho, p);
    let top = argmax(&reference);
    let short_edge = ((energies[top] - reference[top]) / reference[top]).abs() > cst(0.2);
    Ok(PathOnSphere {
        beads,
        ts,
        mu,
        rho,
        p,
        eps,
        delta,
        kind,
        reference,
        short_edge,
        lambda_ref: phi.lambda,
    })
}

/// Pointwise values of one bead, given the model profile `bar` on ℝ.
fn bead<'a, T: Real>(
    g: &'a MetricGraph<T>,
    kind: PathKind,
    halfline_len: T,
    bar: &'a (impl Fn(T) -> T + Sync),
) -> impl Fn(ChainKind, T) -> T + 'a {
    let two = cst::<T>(2.0);
    // model profile on [-2ℓ, 2ℓ] with linear tapers on the outer quarters
    let tapered = move |y: T, l: T| {
        let ay = y.abs();
        if ay <= l {
            bar(y)
        } else if ay <= two * l {
            bar(l) * (two - ay / l)
        } else {
            T::zero()
        }
    };
    let pendant = g.pendants().first().copied();
    let signpost = g.signposts().first().copied();
    move |c: ChainKind, x: T| -> T {
        match kind {
            PathKind::Line => bar(x),
            PathKind::Edge(target) => {
                if c != target {
                    return T::zero();
                }
                let len = match c {
                    ChainKind::Edge(i) => g.edges()[i].len,
                    ChainKind::HalfLine(_) => halfline_len,
                };
                let l = len / cst(4.0);
                tapered(x - two * l, l)
            }
            PathKind::Pendant => {
                let (e, tip) = pendant.unwrap();
                if c != ChainKind::Edge(e) {
                    return T::zero();
                }
                let edge = &g.edges()[e];
                let z = if edge.u == tip { x } else { edge.len - x };
                tapered(z, edge.len / two)
            }
            PathKind::Signpost => {
                let sp = signpost.unwrap();
                let l = g.edges()[sp.loop_edge].len / two;
                if c == ChainKind::Edge(sp.loop_edge) {
                    return bar(x - l);
                }
                match sp.stem {
                    Stem::HalfLine(h) if c == ChainKind::HalfLine(h) => bar((x + two * l) / two),
                    Stem::Edge(e) if c == ChainKind::Edge(e) => {
                        let edge = &g.edges()[e];
                        let z = if edge.u == sp.vertex { x } else { edge.len - x };
                        let a = edge.len / two;
                        if z <= a {
                            bar((z + two * l) / two)
                        } else {
                            bar((a + two * l) / two) * (two - z / a)
                        }
                    }
                    _ => T::zero(),
                }
            }
            PathKind::Auto => unreachable!(),
        }
    }
}

/// Membership of the first bead in `A_δ` and of the last in `B`.
pub fn check_endpoints<T: Real>(path: &PathOnSphere<T>) -> (bool, bool) {
    let Some(first) = path.beads.first() else {
        return (false, false);
    };
    let last = path.beads.last().unwrap();
    let start = first.gradsq() <= path.delta;
    let end = last.energy(cst(0.5), path.p) < T::zero();
    (start, end)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathLevel<T> {
    pub level: T,
    pub argmax: usize,
    /// Both endpoint checks passed, so `level` bounds `c_ρ(G)` from above.
    pub valid_bound: bool,
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn path_max_energy<T: Real>(path: &PathOnSphere<T>) -> PathLevel<T> {
    level_at_rho(path, path.rho)
}

/// Path level with the beads held fixed and `E_ρ` evaluated at another `ρ`.
pub fn level_at_rho<T: Real>(path: &PathOnSphere<T>, rho: T) -> PathLevel<T> {
    let e = energies_at(&path.beads, rho, path.p);
    let i = argmax(&e);
    let (a, b) = check_endpoints(path);
    PathLevel {
        level: e[i],
        argmax: i,
        valid_bound: a && b,
    }
}

#[derive(Clone, Debug)]
pub struct RelaxOutcome<T> {
    pub path: PathOnSphere<T>,
    /// Maximum of `E_ρ` along the piecewise-linear, mass-renormalized curve
    /// through the beads, sampled finely around the top.
    pub level: T,
    /// Maximum over the beads alone.
    pub bead_level: T,
    pub argmax: usize,
    /// `level` after each accepted iteration, starting with the initial one.
    pub history: Vec<T>,
    pub iterations: usize,
    /// Every backoff failed to keep the level from rising.
    pub stalled: bool,
}

const SUBSAMPLES: usize = 8;

/// Level of the curve through the beads: the bead maximum, refined on the
/// segments next to the three highest beads.
pub fn curve_level<T: Real>(beads: &[GridFunction<T>], energies: &[T], mu: T, rho: T, p: T) -> Result<T> {
    let n = beads.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| energies[b].partial_cmp(&energies[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut segs: Vec<usize> = Vec::new();
    for &i in order.iter().take(3) {
        if i > 0 {
            segs.push(i - 1);
        }
        if i + 1 < n {
            segs.push(i);
        }
    }
    segs.sort_unstable();
    segs.dedup();
    let pts: Vec<(usize, usize)> = segs.iter().flat_map(|&k| (1..SUBSAMPLES).map(move |j| (k, j))).collect();
    let inner = pts
        .par_iter()
        .map(|&(k, j)| {
            let th = T::from_usize(j).unwrap() / T::from_usize(SUBSAMPLES).unwrap();
            Ok(lerp(&beads[k], &beads[k + 1], th).project_mass(mu)?.energy(rho, p))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(inner.into_iter().fold(energies[argmax(energies)], |m, e| m.max(e)))
}

fn lerp<T: Real>(a: &GridFunction<T>, b: &GridFunction<T>, th: T) -> GridFunction<T> {
    a.with_values(a.values().iter().zip(b.values()).map(|(&x, &y)| x + th * (y - x)).collect())
}

/// String-method relaxation of the interior beads.
///
/// Each iteration moves every bead outside `A_δ ∪ B` along the preconditioned
/// tangential gradient, renormalizes the masses and redistributes the beads
/// at equal energy-weighted arclength along the new curve. A move that would
/// raise the curve level is retried with half the step; if redistribution
/// alone raises it, the plain descent is kept.
pub fn minmax_relax<T: Real>(path: &PathOnSphere<T>, cfg: &MPConfig<T>) -> Result<RelaxOutcome<T>> {
    cfg.validate()?;
    let (a, b) = check_endpoints(path);
    if !(a && b) {
        return Err(Error::Configuration("path endpoints fail the mountain-pass checks".into()));
    }
    let space = path.space().clone();
    let ops = space.ops();
    let sigma = path.lambda_ref.max(cst(1e-6));
    let pre = ChainSolver::factor(&ops.stiffness.lin_comb(T::one(), &ops.mass, sigma))?;
    let (rho, p, mu) = (path.rho, path.p, path.mu);
    let mut cur = path.clone();
    let mut energies = cur.energies();
    let mut level = curve_level(&cur.beads, &energies, mu, rho, p)?;
    let mut history = vec![level];
    let mut stalled = false;
    let mut step = cfg.step;
    let slack = |l: T| cst::<T>(1e-9) * l.abs().max(T::min_positive_value());
    let n = cur.beads.len();
    let mut iterations = 0;
    for _ in 0..cfg.relax_iters {
        let active: Vec<bool> = (0..n)
            .into_par_iter()
            .map(|i| {
                let u = &cur.beads[i];
                i > 0 && i + 1 < n && u.gradsq() > cur.delta && u.energy(cst(0.5), p) >= T::zero()
            })
            .collect();
        if !active.iter().any(|&x| x) {
            break;
        }
        let dirs: Vec<Option<Vec<T>>> = (0..n)
            .into_par_iter()
            .map(|i| active[i].then(|| tangent_gradient(&cur.beads[i], &pre, mu, rho, p)))
            .collect();
        let mut accepted = None;
        for _ in 0..=cfg.max_backoffs {
            let moved: Vec<GridFunction<T>> = (0..n)
                .into_par_iter()
                .map(|i| match &dirs[i] {
                    None => Ok(cur.beads[i].clone()),
                    Some(d) => {
                        let u = &cur.beads[i];
                        u.with_values(u.values().iter().zip(d).map(|(&x, &y)| x - step * y).collect())
                            .project_mass(mu)
                    }
                })
                .collect::<Result<_>>()?;
            let spread = redistribute(&moved, rho, p, cfg.energy_weight, mu)?;
            let e_spread = energies_at(&spread, rho, p);
            let l_spread = curve_level(&spread, &e_spread, mu, rho, p)?;
            if l_spread <= level + slack(level) {
                accepted = Some((spread, e_spread, l_spread));
                break;
            }
            let e_moved = energies_at(&moved, rho, p);
            let l_moved = curve_level(&moved, &e_moved, mu, rho, p)?;
            if l_moved <= level + slack(level) {
                accepted = Some((moved, e_moved, l_moved));
                break;
            }
            step = step / cst(2.0);
        }
        let Some((beads, e, l)) = accepted else {
            stalled = true;
            break;
        };
        let first = std::mem::replace(&mut cur.beads, beads);
        // endpoints are carried over untouched
        cur.beads[0] = first[0].clone();
        cur.beads[n - 1] = first[n - 1].clone();
        energies = e;
        level = l;
        history.push(level);
        iterations += 1;
        step = (step * cst(1.5)).min(cfg.step);
    }
    let i = argmax(&energies);
    Ok(RelaxOutcome {
        path: cur,
        level,
        bead_level: energies[i],
        argmax: i,
        history,
        iterations,
        stalled,
    })
}

/// `P(A⁻¹ r)`, with `r = K u + λ(u) M u − ρ b(u)` and `P` the mass-orthogonal
/// projection onto the tangent space at `u`.
fn tangent_gradient<T: Real>(u: &GridFunction<T>, pre: &ChainSolver<T>, mu: T, rho: T, p: T) -> Vec<T> {
    let space = u.space();
    let ops = space.ops();
    let lam = multiplier(u, mu, rho, p);
    let ku = ops.stiffness.matvec(u.values());
    let mu_vec = ops.mass.matvec(u.values());
    let b = space.load(u.values(), p);
    let r: Vec<T> = (0..ku.len()).map(|i| ku[i] + lam * mu_vec[i] - rho * b[i]).collect();
    let mut d = pre.solve(&r);
    let c = dot(&mu_vec, &d) / dot(&mu_vec, u.values());
    for (di, &ui) in d.iter_mut().zip(u.values()) {
        *di = *di - c * ui;
    }
    d
}

/// Resamples the interior at equal arclength in the mass norm, weighted by
/// `1 + w·max(0, E/E_max)` so that beads gather near the top.
fn redistribute<T: Real>(beads: &[GridFunction<T>], rho: T, p: T, w: T, mu: T) -> Result<Vec<GridFunction<T>>> {
    let n = beads.len();
    let e = energies_at(beads, rho, p);
    let emax = e[argmax(&e)];
    let space = beads[0].space();
    let mut cum = vec![T::zero(); n];
    for i in 0..n - 1 {
        let diff: Vec<T> = beads[i + 1].values().iter().zip(beads[i].values()).map(|(&a, &b)| a - b).collect();
        let d = space.ops().mass.quad_form(&diff).max(T::zero()).sqrt();
        let eb = (e[i] + e[i + 1]) / cst(2.0);
        let weight = if emax > T::zero() { T::one() + w * (eb / emax).max(T::zero()) } else { T::one() };
        cum[i + 1] = cum[i] + weight * d;
    }
    let total = cum[n - 1];
    if !(total > T::zero()) {
        return Ok(beads.to_vec());
    }
    (0..n)
        .into_par_iter()
        .map(|j| {
            if j == 0 || j == n - 1 {
                return Ok(beads[j].clone());
            }
            let target = total * T::from_usize(j).unwrap() / T::from_usize(n - 1).unwrap();
            let k = cum.partition_point(|&c| c <= target).clamp(1, n - 1) - 1;
            let span = cum[k + 1] - cum[k];
            let th = if span > T::zero() { ((target - cum[k]) / span).min(T::one()) } else { T::zero() };
            lerp(&beads[k], &beads[k + 1], th).project_mass(mu)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_standard, GraphKind};
    use crate::soliton::soliton_energy;

    fn graded(g: &MetricGraph<f64>, kind: PathKind, mu: f64, rho: f64, cfg: &MPConfig<f64>) -> Arc<FemSpace<f64>> {
        let w = narrowest_bead_width(g, kind, mu, rho, cfg).unwrap();
        let r = Refinement {
            foci: vec![path_focus(g, kind, 30.0).unwrap()],
            h_min: w / 40.0,
            growth: 0.02,
        };
        FemSpace::build_refined(g, 0.05, 30.0, &r).unwrap()
    }

    #[test]
    fn a_p_formula_and_validation() {
        let cfg = MPConfig::new(7.0).unwrap();
        assert_eq!(cfg.a_p, 1.5625);
        assert!((a_rho(7.0f64, 0.5).unwrap() - 1.5625).abs() < 1e-15);
        assert!((a_rho(7.0f64, 1.0).unwrap() - 6.25).abs() < 1e-12);
        let mut bad = cfg.clone();
        bad.a_p = 1.5;
        assert!(bad.validate().is_err());
        bad = cfg.clone();
        bad.eps = 2.0;
        assert!(bad.validate().is_err());
        assert!(cfg.clone().with_beads(8).validate().is_err());
        assert!(MPConfig::new(6.0).is_err());
    }

    #[test]
    fn kind_parsing() {
        for s in ["auto", "line", "pendant", "signpost", "edge:e3", "edge:h1"] {
            assert_eq!(s.parse::<PathKind>().unwrap().to_string(), s);
        }
        assert_eq!("edge:2".parse::<PathKind>().unwrap(), PathKind::Edge(ChainKind::Edge(2)));
        assert!("edge:x".parse::<PathKind>().is_err());
        assert!("spiral".parse::<PathKind>().is_err());
    }

    #[test]
    fn auto_resolution() {
        let k = |g: GraphKind<f64>| resolve_kind(&build_standard(&g).unwrap(), PathKind::Auto).unwrap();
        assert_eq!(k(GraphKind::Line), PathKind::Line);
        assert_eq!(k(GraphKind::HalfLine), PathKind::Line);
        assert_eq!(k(GraphKind::TGraph { pendant_len: 1.0 }), PathKind::Pendant);
        assert_eq!(k(GraphKind::Tadpole { loop_len: 2.0 }), PathKind::Signpost);
        assert_eq!(k(GraphKind::Star(4)), PathKind::Edge(ChainKind::HalfLine(0)));
        let lad = k(GraphKind::Ladder {
            cell_len: 1.0,
            rung_len: 1.0,
            n_cells: 4,
            caps: crate::graph::LadderCaps::Dirichlet,
        });
        // rails 0..4 and 4..8; the middle rail edges touch vertex 2
        assert!(matches!(lad, PathKind::Edge(ChainKind::Edge(1 | 2 | 5 | 6 | 10))));
        let star = build_standard::<f64>(&GraphKind::Star(3)).unwrap();
        assert!(resolve_kind(&star, PathKind::Pendant).is_err());
        assert!(resolve_kind(&star, PathKind::Signpost).is_err());
        assert!(resolve_kind(&star, PathKind::Line).is_err());
    }

    #[test]
    fn canonical_line_path() {
        let (p, mu, rho) = (7.0, 2.5, 1.0);
        let g = build_standard(&GraphKind::Line).unwrap();
        let cfg = MPConfig::new(p).unwrap().with_beads(64);
        let sp = graded(&g, PathKind::Line, mu, rho, &cfg);
        let path = build_path(&sp, PathKind::Line, mu, rho, &cfg).unwrap();
        assert_eq!(check_endpoints(&path), (true, true));
        for b in &path.beads {
            assert!((b.l2sq() / mu - 1.0).abs() < 1e-10);
        }
        let lvl = path_max_energy(&path);
        assert!(lvl.valid_bound);
        let c = soliton_energy(p, mu, rho).unwrap();
        assert!((lvl.level / c - 1.0).abs() < 5e-3, "{} vs {c}", lvl.level);
        let t_star = (1.0 - path.eps) / a_rho(p, rho).unwrap();
        let i_star = (t_star * 63.0).round() as usize;
        assert!(lvl.argmax.abs_diff(i_star) <= 1);
        // monotone in rho with the beads fixed
        let lower = level_at_rho(&path, 0.75).level;
        assert!(lower >= lvl.level);
    }

    #[test]
    fn degenerate_paths_fail_endpoint_checks() {
        let (p, mu, rho) = (7.0, 2.5, 1.0);
        let g = build_standard(&GraphKind::Line).unwrap();
        let cfg = MPConfig::new(p).unwrap().with_beads(16);
        let sp = graded(&g, PathKind::Line, mu, rho, &cfg);
        let mut path = build_path(&sp, PathKind::Line, mu, rho, &cfg).unwrap();
        let flat = GridFunction::from_fn(sp.clone(), |_, x: f64| (-(x / 10.0).powi(2)).exp()).project_mass(mu).unwrap();
        path.beads = vec![flat.clone(); 16];
        assert_eq!(check_endpoints(&path), (true, false));
        assert!(minmax_relax(&path, &cfg).is_err());
        let sol = crate::soliton::SolitonParams::new(p, mu, rho).unwrap();
        let phi = GridFunction::from_fn(sp.clone(), |_, x| sol.eval(x));
        path.delta = phi.gradsq() / 100.0;
        path.beads = vec![phi; 16];
        assert!(!check_endpoints(&path).0);
    }

    #[test]
    fn relaxation_keeps_masses_endpoints_and_level() {
        let (p, mu, rho) = (7.0, 2.5, 1.0);
        let g = build_standard(&GraphKind::Line).unwrap();
        let cfg = MPConfig::new(p).unwrap().with_beads(24).with_relax_iters(15);
        let sp = graded(&g, PathKind::Line, mu, rho, &cfg);
        let mut path = build_path(&sp, PathKind::Line, mu, rho, &cfg).unwrap();
        let n = path.len();
        // perturb the interior
        for (i, b) in path.beads.iter_mut().enumerate().take(n - 1).skip(1) {
            let bump = GridFunction::from_fn(sp.clone(), |_, x| 0.05 * (i as f64).sin() * (-x * x).exp());
            let v = b.values().iter().zip(bump.values()).map(|(a, c)| a + c * b.sup()).collect();
            *b = b.with_values(v).project_mass(mu).unwrap();
        }
        let out = minmax_relax(&path, &cfg).unwrap();
        assert!(out.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert_eq!(out.path.beads[0].values(), path.beads[0].values());
        assert_eq!(out.path.beads[n - 1].values(), path.beads[n - 1].values());
        for b in &out.path.beads {
            assert!((b.l2sq() / mu - 1.0).abs() < 1e-10);
        }
        let c = soliton_energy(p, mu, rho).unwrap();
        assert!((out.level / c - 1.0).abs() < 0.01, "{} vs {c}", out.level);
    }
}
