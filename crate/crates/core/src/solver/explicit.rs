use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{ChainKind, FemSpace, GridFunction};
use crate::scalar::{cst, Real};
use crate::soliton::Soliton;

use super::StationarySolution;

/// The constant-core solution on a graph whose vertices each carry an even
/// number of half-lines, together with its closed-form mass and energy.
#[derive(Clone, Debug)]
pub struct ExplicitSolution<T> {
    pub solution: StationarySolution<T>,
    /// Shift with `φ_λ(τ) = λ^{1/(p-2)}`, found by bisection.
    pub tau: T,
    /// `arcsech(√(2/p))/k`, the analytic value of the same shift.
    pub tau_closed_form: T,
    pub core_value: T,
    pub mass_formula: T,
    pub energy_formula: T,
}

/// `‖u_λ‖₂² = |K| λ^{2/(p-2)} + (n/2) λ^{(6-p)/(2(p-2))} ‖φ₁‖₂²`.
pub fn explicit_mass<T: Real>(core_len: T, n_halflines: usize, lambda: T, p: T) -> Result<T> {
    let phi1 = Soliton::from_lambda(p, T::one(), T::one())?;
    let pm2 = p - cst(2.0);
    let k = T::from_usize(n_halflines).unwrap() / cst(2.0);
    Ok(core_len * lambda.powf(cst::<T>(2.0) / pm2)
        + k * lambda.powf((cst::<T>(6.0) - p) / (cst::<T>(2.0) * pm2)) * phi1.mass())
}

/// `E(u_λ) = (n/2)(½‖φ₁'‖² − ‖φ₁‖_p^p/p) λ^{(p+2)/(2(p-2))} − (|K|/p) λ^{p/(p-2)}`.
pub fn explicit_energy<T: Real>(core_len: T, n_halflines: usize, lambda: T, p: T) -> Result<T> {
    let phi1 = Soliton::from_lambda(p, T::one(), T::one())?;
    let pm2 = p - cst(2.0);
    let k = T::from_usize(n_halflines).unwrap() / cst(2.0);
    Ok(k * phi1.energy() * lambda.powf((p + cst(2.0)) / (cst::<T>(2.0) * pm2))
        - core_len / p * lambda.powf(p / pm2))
}

/// Builds `u_λ`: the constant `λ^{1/(p-2)}` on every bounded edge and, at each
/// vertex, half-lines paired as `φ_λ(x + τ)` and `φ_λ(x − τ)` so that the
/// outgoing derivatives cancel.
pub fn explicit_even_halfline_solution<T: Real>(
    space: &Arc<FemSpace<T>>,
    lambda: T,
    p: T,
) -> Result<ExplicitSolution<T>> {
    let g = space.mesh().graph();
    let report = g.classify()?;
    if !report.every_vertex_even_halflines || g.edges().is_empty() || report.n_halflines == 0 {
        return Err(Error::UnsupportedTopology(
            "needs at least one bounded edge, at least one half-line, and an even number of half-lines at every vertex"
                .into(),
        ));
    }
    if !g.dirichlet_vertices().is_empty() {
        return Err(Error::UnsupportedTopology("Dirichlet vertices are not supported".into()));
    }
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let phi = Soliton::from_lambda(p, lambda, T::one())?;
    let c = lambda.powf(T::one() / (p - cst(2.0)));
    // φ decreases on [0, ∞) from its peak above c to 0
    let (mut lo, mut hi) = (T::zero(), phi.width());
    while phi.eval(hi) > c {
        hi = hi * cst(2.0);
    }
    for _ in 0..200 {
        let mid = cst::<T>(0.5) * (lo + hi);
        if phi.eval(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= cst::<T>(1e-14) * hi {
            break;
        }
    }
    let tau = cst::<T>(0.5) * (lo + hi);
    let z = (cst::<T>(2.0) / p).sqrt();
    let arcsech = ((T::one() + (T::one() - z * z).sqrt()) / z).ln();
    let tau_closed_form = arcsech / phi.k;

    let mut shift = vec![T::zero(); g.halflines().len()];
    for v in 0..g.n_vertices() {
        let at_v: Vec<usize> = (0..g.halflines().len()).filter(|&i| g.halflines()[i] == v).collect();
        for pair in at_v.chunks(2) {
            shift[pair[0]] = tau;
            shift[pair[1]] = -tau;
        }
    }
    let u = GridFunction::from_fn(space.clone(), |kind, x| match kind {
        ChainKind::Edge(_) => c,
        ChainKind::HalfLine(i) => phi.eval(x + shift[i]),
    });
    let core = g.compact_core_length();
    let nh = g.halflines().len();
    let solution = StationarySolution::with_lambda(u, lambda, T::one(), p, 0, vec![]);
    Ok(ExplicitSolution {
        solution,
        tau,
        tau_closed_form,
        core_value: c,
        mass_formula: explicit_mass(core, nh, lambda, p)?,
        energy_formula: explicit_energy(core, nh, lambda, p)?,
    })
}
