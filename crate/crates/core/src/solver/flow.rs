use crate::error::{Error, Result};
use crate::fem::GridFunction;
use crate::linalg::ChainSolver;
use crate::scalar::{cst, Real};

use super::{check_common, multiplier, newton_constrained, reject_zero, SolverConfig, StationarySolution};

/// Normalized gradient flow followed by a Newton polish.
///
/// Each step solves `(M + dt K) u* = M u + dt ρ b(u)` and projects back onto
/// the mass sphere. A step that raises the energy is retried with half the
/// time step. The iterate with the smallest projected gradient seeds Newton.
pub fn gradient_flow_normalized<T: Real>(
    u0: &GridFunction<T>,
    mu: T,
    rho: T,
    p: T,
    cfg: &SolverConfig<T>,
) -> Result<StationarySolution<T>> {
    check_common(mu, rho, p)?;
    reject_zero(u0)?;
    let space = u0.space().clone();
    let ops = space.ops();
    let mut u = u0.project_mass(mu)?;
    let mut energy = u.energy(rho, p);
    let projected = |u: &GridFunction<T>| u.pde_residual(multiplier(u, mu, rho, p), rho, p);
    let mut best = (projected(&u), u.clone());
    let mut history = vec![best.0];
    let mut dt = cfg.dt;
    let mut factor: Option<(T, ChainSolver<T>)> = None;
    let mut iterations = 0;
    while iterations < cfg.flow_max_iter && best.0 > cfg.flow_tol {
        let mut halvings = 0;
        let next = loop {
            if factor.as_ref().is_none_or(|(d, _)| *d != dt) {
                let a = ops.mass.lin_comb(T::one(), &ops.stiffness, dt);
                factor = Some((dt, ChainSolver::factor(&a)?));
            }
            let solver = &factor.as_ref().unwrap().1;
            let mut rhs = ops.mass.matvec(u.values());
            let b = space.load(u.values(), p);
            for (r, bi) in rhs.iter_mut().zip(&b) {
                *r = *r + dt * rho * *bi;
            }
            let cand = u.with_values(solver.solve(&rhs)).project_mass(mu)?;
            let e = cand.energy(rho, p);
            if e <= energy + cst::<T>(1e-13) * energy.abs().max(T::one()) {
                break (cand, e);
            }
            halvings += 1;
            if halvings > cfg.max_halvings {
                return Err(Error::StepFailure { halvings });
            }
            dt = dt * cst(0.5);
        };
        debug_assert!(next.1 <= energy + cst::<T>(1e-12) * energy.abs().max(T::one()));
        u = next.0;
        energy = next.1;
        iterations += 1;
        let r = projected(&u);
        history.push(r);
        if r < best.0 {
            best = (r, u.clone());
        }
        if !r.is_finite() || u.sup() > cst::<T>(1e12) {
            break;
        }
    }
    let mut sol = newton_constrained(&best.1, mu, rho, p, cfg)?;
    sol.iterations += iterations;
    history.extend(sol.history.iter().copied());
    sol.history = history;
    Ok(sol)
}
