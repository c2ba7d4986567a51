//! Constrained critical points of `E_ρ` on the mass sphere.

mod continuation;
mod explicit;
mod flow;
mod nehari;
mod newton;

pub use continuation::rho_continuation;
pub use explicit::{explicit_energy, explicit_even_halfline_solution, explicit_mass, ExplicitSolution};
pub use flow::gradient_flow_normalized;
pub use nehari::{nehari_minimize, nehari_reduced, nehari_scaling, NehariSolution};
pub use newton::{newton_constrained, newton_fixed_lambda};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::GridFunction;
use crate::scalar::{cst, to_f64, Real};

/// Tolerances and step controls shared by the solvers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig<T> {
    /// Target for the mass-norm PDE residual.
    pub tol_residual: T,
    /// Alternative target relative to `ρ‖|u|^{p-2}u‖`, which is what round-off
    /// allows for strongly concentrated solutions.
    pub tol_relative: T,
    pub max_iter: usize,
    /// Armijo constant of the backtracking line search.
    pub armijo: T,
    pub max_halvings: usize,
    /// Initial step of the normalized gradient flow.
    pub dt: T,
    /// Projected-gradient tolerance at which the flow hands over to Newton.
    pub flow_tol: T,
    pub flow_max_iter: usize,
    /// ρ values visited by the continuation, ascending and ending at 1.
    pub rho_grid: Vec<T>,
    /// Number of times a continuation step may be halved.
    pub max_rho_halvings: usize,
    pub minres_tol: T,
    pub minres_max_iter: usize,
    pub nehari_restarts: usize,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            tol_residual: cst(1e-10),
            tol_relative: cst(1e-10),
            max_iter: 60,
            armijo: cst(1e-4),
            max_halvings: 30,
            dt: cst(0.05),
            flow_tol: cst(1e-6),
            flow_max_iter: 3000,
            rho_grid: default_rho_grid(),
            max_rho_halvings: 5,
            minres_tol: cst(1e-11),
            minres_max_iter: 4000,
            nehari_restarts: 5,
        }
    }
}

/// `1/2, 0.55, …, 1`.
pub fn default_rho_grid<T: Real>() -> Vec<T> {
    (0..=10).map(|i| cst(0.5 + 0.05 * i as f64)).collect()
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > T::zero()) {
            return Err(Error::Configuration("tol_residual must be positive".into()));
        }
        if !(self.tol_relative >= T::zero()) {
            return Err(Error::Configuration("tol_relative must be non-negative".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Configuration("max_iter must be at least 1".into()));
        }
        if !(self.dt > T::zero()) {
            return Err(Error::Configuration("dt must be positive".into()));
        }
        let g = &self.rho_grid;
        if g.is_empty() || *g.last().unwrap() != T::one() {
            return Err(Error::Configuration("rho_grid must end at 1".into()));
        }
        if g.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Configuration("rho_grid must be strictly ascending".into()));
        }
        if g[0] < cst(0.5) {
            return Err(Error::Configuration("rho_grid must lie in [1/2, 1]".into()));
        }
        Ok(())
    }
}

/// A converged discrete solution.
#[derive(Clone, Debug)]
pub struct StationarySolution<T> {
    pub u: GridFunction<T>,
    pub lambda: T,
    pub mu: T,
    pub rho: T,
    pub p: T,
    pub energy: T,
    pub residual: T,
    /// `residual / (ρ‖|u|^{p-2}u‖)`, both in the mass-dual norm.
    pub relative_residual: T,
    pub iterations: usize,
    pub positive: bool,
    /// Residual after each iteration of the producing solver.
    pub history: Vec<T>,
}

/// Serializable summary of a [`StationarySolution`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionSummary {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub p: f64,
    pub energy: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub iterations: usize,
    pub positive: bool,
    pub sup: f64,
    pub min: f64,
}

impl<T: Real> StationarySolution<T> {
    /// Fills the derived fields from `u` with the multiplier formula.
    pub fn from_state(u: GridFunction<T>, rho: T, p: T, iterations: usize, history: Vec<T>) -> Self {
        let mu = u.l2sq();
        let lambda = multiplier(&u, mu, rho, p);
        Self::with_lambda(u, lambda, rho, p, iterations, history)
    }

    /// Fills the derived fields for a given multiplier.
    pub fn with_lambda(u: GridFunction<T>, lambda: T, rho: T, p: T, iterations: usize, history: Vec<T>) -> Self {
        let mu = u.l2sq();
        let energy = u.energy(rho, p);
        let residual = u.pde_residual(lambda, rho, p);
        let relative_residual = residual / nonlinear_scale(&u, rho, p).max(T::min_positive_value());
        let positive = is_positive(&u);
        StationarySolution {
            u,
            lambda,
            mu,
            rho,
            p,
            energy,
            residual,
            relative_residual,
            iterations,
            positive,
            history,
        }
    }

    pub fn sup(&self) -> T {
        self.u.sup()
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            lambda: to_f64(self.lambda),
            mu: to_f64(self.mu),
            rho: to_f64(self.rho),
            p: to_f64(self.p),
            energy: to_f64(self.energy),
            residual: to_f64(self.residual),
            relative_residual: to_f64(self.relative_residual),
            iterations: self.iterations,
            positive: self.positive,
            sup: to_f64(self.u.sup()),
            min: to_f64(self.u.min_value()),
        }
    }
}

/// Positive up to discretization-scale undershoot of `1e-8 · sup`.
pub fn is_positive<T: Real>(u: &GridFunction<T>) -> bool {
    let sup = u.sup();
    sup > T::zero() && u.min_value() > -cst::<T>(1e-8) * sup
}

/// `ρ‖|u|^{p-2}u‖` in the mass-dual norm.
pub fn nonlinear_scale<T: Real>(u: &GridFunction<T>, rho: T, p: T) -> T {
    let sp = u.space();
    let b = sp.load(u.values(), p);
    rho * crate::linalg::dot(&b, &sp.mass_solve(&b)).max(T::zero()).sqrt()
}

/// `λ = (ρ‖u‖_p^p − ‖u'‖₂²)/μ`.
pub fn multiplier<T: Real>(u: &GridFunction<T>, mu: T, rho: T, p: T) -> T {
    (rho * u.lpp(p) - u.gradsq()) / mu
}

pub(crate) fn check_common<T: Real>(mu: T, rho: T, p: T) -> Result<()> {
    if !(mu > T::zero() && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {}", to_f64(mu))));
    }
    if !(rho > T::zero() && rho <= T::one()) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {}", to_f64(rho))));
    }
    if !(p > cst(2.0)) {
        return Err(Error::InvalidParameter(format!("p must exceed 2, got {}", to_f64(p))));
    }
    Ok(())
}

pub(crate) fn reject_zero<T: Real>(u: &GridFunction<T>) -> Result<()> {
    if u.values().iter().all(|&v| v == T::zero()) {
        return Err(Error::InvalidParameter("initial guess is the zero function".into()));
    }
    Ok(())
}
