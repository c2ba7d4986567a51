use crate::error::{Error, Result};
use crate::fem::GridFunction;
use crate::scalar::{cst, to_f64, Real};

use super::{newton_constrained, SolverConfig, StationarySolution};

/// Solves along `cfg.rho_grid` with warm starts, halving a step that fails.
/// Intermediate ρ values inserted by halving are kept in the returned chain;
/// the last entry has `ρ = 1`.
pub fn rho_continuation<T: Real>(
    u0: &GridFunction<T>,
    mu: T,
    p: T,
    cfg: &SolverConfig<T>,
) -> Result<Vec<StationarySolution<T>>> {
    cfg.validate()?;
    let grid = &cfg.rho_grid;
    let wrap = |rho: T, e: Error| Error::Continuation {
        rho: to_f64(rho),
        source: Box::new(e),
    };
    let first = newton_constrained(u0, mu, grid[0], p, cfg).map_err(|e| wrap(grid[0], e))?;
    let mut chain = vec![first];
    for &target in &grid[1..] {
        let mut halvings = 0;
        loop {
            let last = chain.last().unwrap();
            let from = last.rho;
            let span = target - from;
            let rho = from + span / cst::<T>(2.0).powi(halvings as i32);
            match newton_constrained(&last.u, mu, rho, p, cfg) {
                Ok(sol) => {
                    chain.push(sol);
                    if rho == target {
                        break;
                    }
                    halvings = 0;
                }
                Err(e) => {
                    halvings += 1;
                    if halvings > cfg.max_rho_halvings {
                        return Err(wrap(rho, e));
                    }
                }
            }
        }
    }
    Ok(chain)
}
