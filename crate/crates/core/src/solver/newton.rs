use std::sync::Arc;

use crate::error::{Error, LastIterate, Result};
use crate::fem::{FemSpace, GridFunction};
use crate::linalg::{dot, minres, ChainSolver};
use crate::scalar::{cst, to_f64, Real};

use super::{check_common, reject_zero, SolverConfig, StationarySolution};

struct Residual<T> {
    f1: Vec<T>,
    f2: T,
    /// `‖F1‖²_{M⁻¹}`.
    r2: T,
    /// `ρ‖b‖_{M⁻¹}`.
    scale: T,
    /// Round-off level of `F1` in the same norm.
    floor: T,
}

impl<T: Real> Residual<T> {
    fn merit(&self) -> T {
        self.r2 + self.f2 * self.f2
    }
}

fn residual<T: Real>(space: &FemSpace<T>, u: &[T], lambda: Option<T>, mu: T, rho: T, p: T) -> (Residual<T>, T) {
    let ops = space.ops();
    let ku = ops.stiffness.matvec(u);
    let mu_vec = ops.mass.matvec(u);
    let b = space.load(u, p);
    let mass = dot(u, &mu_vec);
    let lam = lambda.unwrap_or_else(|| (rho * dot(&b, u) - dot(&ku, u)) / mass);
    let f1: Vec<T> = (0..u.len()).map(|i| ku[i] + lam * mu_vec[i] - rho * b[i]).collect();
    let z = space.mass_solve(&f1);
    let r2 = dot(&f1, &z).max(T::zero());
    let f2 = cst::<T>(0.5) * (mass - mu);
    let scale = rho * dot(&b, &space.mass_solve(&b)).max(T::zero()).sqrt();
    let floor = roundoff_floor(space, mass.max(T::zero()).sqrt(), lam, scale);
    (Residual { f1, f2, r2, scale, floor }, lam)
}

/// `32ε(4‖u‖/h_min² + |λ|‖u‖ + ρ‖b‖)`: cancellation in the stiffness rows
/// dominates on fine meshes, the multiplier term at high frequency.
pub(crate) fn roundoff_floor<T: Real>(space: &FemSpace<T>, norm: T, lambda: T, scale: T) -> T {
    let h = space
        .mesh()
        .chains()
        .iter()
        .map(|c| c.h_min())
        .fold(T::infinity(), T::min);
    cst::<T>(32.0) * T::epsilon() * (cst::<T>(4.0) * norm / (h * h) + lambda.abs() * norm + scale)
}

fn converged<T: Real>(r: T, scale: T, floor: T, cfg: &SolverConfig<T>) -> bool {
    r <= cfg.tol_residual || r <= cfg.tol_relative * scale || r <= floor
}

fn shift_for<T: Real>(lambda: T) -> T {
    if lambda > T::zero() {
        lambda
    } else {
        lambda.abs() + T::one()
    }
}

fn non_convergence<T: Real>(iterations: usize, residual: T, u: &[T], lambda: T) -> Error {
    Error::NonConvergence {
        iterations,
        residual: to_f64(residual),
        last: Some(Box::new(LastIterate {
            values: u.iter().map(|&v| to_f64(v)).collect(),
            lambda: to_f64(lambda),
        })),
    }
}

/// Damped Newton on the bordered system
/// `F(u, λ) = (K u + λ M u − ρ b(u), ½(uᵀM u − μ)) = 0`.
///
/// The indefinite Jacobian is solved with MINRES preconditioned by
/// `diag(K + σM, s)`, which tolerates the near-null translation mode of
/// solutions on the line.
pub fn newton_constrained<T: Real>(
    u0: &GridFunction<T>,
    mu: T,
    rho: T,
    p: T,
    cfg: &SolverConfig<T>,
) -> Result<StationarySolution<T>> {
    check_common(mu, rho, p)?;
    reject_zero(u0)?;
    let space: Arc<FemSpace<T>> = u0.space().clone();
    let n = space.n_dofs();
    let mut u = u0.project_mass(mu)?.into_values();
    let (mut res, mut lambda) = residual(&space, &u, None, mu, rho, p);
    let mut history = vec![res.r2.sqrt()];
    let mass_tol = cst::<T>(1e-12) * mu;
    for it in 0..=cfg.max_iter {
        let r = res.r2.sqrt();
        if converged(r, res.scale, res.floor, cfg) && res.f2.abs() <= mass_tol {
            let g = u0.with_values(u).project_mass(mu)?;
            let sol = StationarySolution::from_state(g, rho, p, it, history);
            return Ok(sol);
        }
        if it == cfg.max_iter {
            break;
        }
        let ops = space.ops();
        let jac = ops
            .stiffness
            .lin_comb(T::one(), &ops.mass, lambda)
            .lin_comb(T::one(), &space.load_jacobian(&u, p), -rho);
        let sigma = shift_for(lambda);
        let pre = ChainSolver::factor(&ops.stiffness.lin_comb(T::one(), &ops.mass, sigma))?;
        let c = ops.mass.matvec(&u);
        let s = dot(&c, &pre.solve(&c)).max(T::min_positive_value());
        let apply = |z: &[T]| {
            let mut out = jac.matvec(&z[..n]);
            for i in 0..n {
                out[i] = out[i] + c[i] * z[n];
            }
            out.push(dot(&c, &z[..n]));
            out
        };
        let precond = |r: &[T]| {
            let mut z = pre.solve(&r[..n]);
            z.push(r[n] / s);
            z
        };
        let mut rhs: Vec<T> = res.f1.iter().map(|&v| -v).collect();
        rhs.push(-res.f2);
        let (step, info) = minres(apply, precond, &rhs, cfg.minres_tol, cfg.minres_max_iter);
        if !info.converged && info.rel_residual > 1e-3 {
            return Err(Error::SingularJacobian { iterations: it });
        }
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian { iterations: it });
        }
        let m0 = res.merit();
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<T> = (0..n).map(|i| u[i] + t * step[i]).collect();
            let lam_trial = lambda + t * step[n];
            let (r_trial, _) = residual(&space, &trial, Some(lam_trial), mu, rho, p);
            if r_trial.merit() <= (T::one() - cfg.armijo * t) * m0 {
                accepted = Some((trial, lam_trial, r_trial));
                break;
            }
            t = t * cst(0.5);
        }
        let Some((nu, nl, nr)) = accepted else {
            return Err(non_convergence(it + 1, res.r2.sqrt(), &u, lambda));
        };
        u = nu;
        lambda = nl;
        res = nr;
        history.push(res.r2.sqrt());
    }
    Err(non_convergence(cfg.max_iter, res.r2.sqrt(), &u, lambda))
}

/// Damped Newton for `K u + λ M u − ρ b(u) = 0` at a fixed frequency `λ > 0`
/// (no mass constraint). The Jacobian is preconditioned by `K + λM`.
pub fn newton_fixed_lambda<T: Real>(
    u0: &GridFunction<T>,
    lambda: T,
    rho: T,
    p: T,
    cfg: &SolverConfig<T>,
) -> Result<StationarySolution<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParameter("fixed-frequency Newton needs lambda > 0".into()));
    }
    reject_zero(u0)?;
    let space = u0.space().clone();
    let ops = space.ops();
    let a = ops.stiffness.lin_comb(T::one(), &ops.mass, lambda);
    let pre = ChainSolver::factor(&a)?;
    let eval = |u: &[T]| {
        let mut f = a.matvec(u);
        let b = space.load(u, p);
        for (fi, bi) in f.iter_mut().zip(&b) {
            *fi = *fi - rho * *bi;
        }
        let r2 = dot(&f, &space.mass_solve(&f)).max(T::zero());
        let scale = rho * dot(&b, &space.mass_solve(&b)).max(T::zero()).sqrt();
        let norm = ops.mass.quad_form(u).max(T::zero()).sqrt();
        (f, r2, scale, roundoff_floor(&space, norm, lambda, scale))
    };
    let mut u = u0.values().to_vec();
    let (mut f, mut r2, mut scale, mut floor) = eval(&u);
    let mut history = vec![r2.sqrt()];
    for it in 0..=cfg.max_iter {
        if converged(r2.sqrt(), scale, floor, cfg) {
            let g = u0.with_values(u);
            return Ok(StationarySolution::with_lambda(g, lambda, rho, p, it, history));
        }
        if it == cfg.max_iter {
            break;
        }
        let jac = a.lin_comb(T::one(), &space.load_jacobian(&u, p), -rho);
        let rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        let (step, info) = minres(|z| jac.matvec(z), |r| pre.solve(r), &rhs, cfg.minres_tol, cfg.minres_max_iter);
        if (!info.converged && info.rel_residual > 1e-3) || step.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian { iterations: it });
        }
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<T> = u.iter().zip(&step).map(|(&a, &d)| a + t * d).collect();
            let (ft, rt, st, fl) = eval(&trial);
            if rt <= (T::one() - cfg.armijo * t) * r2 {
                accepted = Some((trial, ft, rt, st, fl));
                break;
            }
            t = t * cst(0.5);
        }
        let Some((nu, nf, nr, ns, nfl)) = accepted else {
            return Err(non_convergence(it + 1, r2.sqrt(), &u, lambda));
        };
        u = nu;
        f = nf;
        r2 = nr;
        scale = ns;
        floor = nfl;
        history.push(r2.sqrt());
    }
    Err(non_convergence(cfg.max_iter, r2.sqrt(), &u, lambda))
}
