use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{distance_from_vertex, FemSpace, GridFunction};
use crate::linalg::{dot, ChainSolver};
use crate::scalar::{cst, Real};

use super::{newton_fixed_lambda, SolverConfig, StationarySolution};

/// Result of a Nehari-manifold minimization at fixed frequency.
#[derive(Clone, Debug)]
pub struct NehariSolution<T> {
    pub solution: StationarySolution<T>,
    /// `J_{λ,p}` of the returned solution.
    pub level: T,
    /// Seeds discarded before the returned one was found.
    pub restarts: usize,
}

/// `t(u)` with `t^{p-2} = (‖u'‖² + λ‖u‖²)/‖u‖_p^p`, so that `t(u)u ∈ N_{λ,p}`.
pub fn nehari_scaling<T: Real>(u: &GridFunction<T>, lambda: T, p: T) -> T {
    let q = u.gradsq() + lambda * u.l2sq();
    (q / u.lpp(p)).powf(T::one() / (p - cst(2.0)))
}

/// `J_{λ,p}(t(u)u) = (1/2 − 1/p) Q^{p/(p-2)} N^{-2/(p-2)}`.
pub fn nehari_reduced<T: Real>(u: &GridFunction<T>, lambda: T, p: T) -> T {
    let q = u.gradsq() + lambda * u.l2sq();
    let n = u.lpp(p);
    let pm2 = p - cst(2.0);
    (cst::<T>(0.5) - p.recip()) * q.powf(p / pm2) * n.powf(-cst::<T>(2.0) / pm2)
}

/// `J_{λ,p}(u) = ½‖u'‖² + (λ/2)‖u‖² − (1/p)‖u‖_p^p`.
pub fn nehari_functional<T: Real>(u: &GridFunction<T>, lambda: T, p: T) -> T {
    cst::<T>(0.5) * (u.gradsq() + lambda * u.l2sq()) - u.lpp(p) / p
}

fn default_seeds<T: Real>(space: &Arc<FemSpace<T>>, lambda: T) -> Vec<GridFunction<T>> {
    let g = space.mesh().graph();
    let rate = lambda.sqrt();
    (0..g.n_vertices())
        .filter(|&v| !g.is_dirichlet(v))
        .map(|v| distance_from_vertex(space, v).map(|d| (-rate * d).exp()))
        .collect()
}

fn descend<T: Real>(
    seed: &GridFunction<T>,
    lambda: T,
    p: T,
    pre: &ChainSolver<T>,
    cfg: &SolverConfig<T>,
) -> Option<GridFunction<T>> {
    let space = seed.space().clone();
    let a = space.ops().stiffness.lin_comb(T::one(), &space.ops().mass, lambda);
    let log_r = |u: &GridFunction<T>| {
        let q = a.quad_form(u.values());
        let n = u.lpp(p);
        q.ln() - cst::<T>(2.0) / p * n.ln()
    };
    let renorm = |u: GridFunction<T>| {
        let t = nehari_scaling(&u, lambda, p);
        u.scaled(t)
    };
    let mut u = renorm(seed.clone());
    let mut r = log_r(&u);
    let mut step = T::one();
    let tol = cst::<T>(1e-9);
    for _ in 0..cfg.flow_max_iter {
        let q = a.quad_form(u.values());
        let n = u.lpp(p);
        if !(q.is_finite() && n.is_finite() && n > T::zero()) {
            return None;
        }
        let b = space.load(u.values(), p);
        let ainv_b = pre.solve(&b);
        // A⁻¹∇R with ∇R = 2Au/Q − 2b/N
        let two = cst::<T>(2.0);
        let dir: Vec<T> = u
            .values()
            .iter()
            .zip(&ainv_b)
            .map(|(&ui, &wi)| -(two * ui / q - two * wi / n))
            .collect();
        let au = a.matvec(u.values());
        let grad: Vec<T> = au.iter().zip(&b).map(|(&x, &y)| two * x / q - two * y / n).collect();
        let slope = dot(&grad, &dir);
        let gnorm = (-slope).max(T::zero()).sqrt() * q.sqrt() / two;
        if gnorm <= tol {
            return Some(u);
        }
        let scale = q / two;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let s = step * scale;
            let trial = u.with_values(u.values().iter().zip(&dir).map(|(&x, &d)| x + s * d).collect());
            let rt = log_r(&trial);
            if rt.is_finite() && rt <= r + cfg.armijo * s * slope {
                accepted = Some((trial, rt));
                break;
            }
            step = step * cst(0.5);
        }
        // round-off stagnation near a critical point: Newton finishes
        let Some((nu, nr)) = accepted else {
            return (gnorm <= cst(1e-6)).then_some(u);
        };
        if (r - nr).abs() <= T::epsilon() * cst(4.0) * r.abs().max(T::one()) && gnorm <= cst(1e-6) {
            return Some(renorm(nu));
        }
        u = renorm(nu);
        r = nr;
        step = (step * cst(2.0)).min(T::one());
    }
    None
}

/// Minimizes `u ↦ J_{λ,p}(t(u)u)` by preconditioned descent from each seed
/// (bumps centred at every vertex by default), polishes each candidate with a
/// fixed-frequency Newton solve and returns the lowest level. The mass of the
/// result is an output.
pub fn nehari_minimize<T: Real>(
    space: &Arc<FemSpace<T>>,
    lambda: T,
    p: T,
    seeds: Option<Vec<GridFunction<T>>>,
    cfg: &SolverConfig<T>,
) -> Result<NehariSolution<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParameter("Nehari minimization needs lambda > 0".into()));
    }
    if !(p > cst(2.0)) {
        return Err(Error::InvalidParameter("p must exceed 2".into()));
    }
    let seeds = seeds.unwrap_or_else(|| default_seeds(space, lambda));
    let ops = space.ops();
    let pre = ChainSolver::factor(&ops.stiffness.lin_comb(T::one(), &ops.mass, lambda))?;
    let mut best: Option<NehariSolution<T>> = None;
    let mut failures = 0;
    for seed in seeds.iter().take(cfg.nehari_restarts.max(1) + 1) {
        let Some(u) = descend(seed, lambda, p, &pre, cfg) else {
            failures += 1;
            continue;
        };
        let Ok(sol) = newton_fixed_lambda(&u, lambda, T::one(), p, cfg) else {
            failures += 1;
            continue;
        };
        let level = nehari_functional(&sol.u, lambda, p);
        if best.as_ref().is_none_or(|b| level < b.level) {
            best = Some(NehariSolution {
                solution: sol,
                level,
                restarts: failures,
            });
        }
    }
    best.ok_or(Error::NonConvergence {
        iterations: cfg.flow_max_iter,
        residual: f64::NAN,
        last: None,
    })
}
