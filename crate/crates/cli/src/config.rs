//! Optional JSON config file; flags override it, and it overrides defaults.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub p: Option<f64>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub lambda: Option<f64>,
    pub h: Option<f64>,
    #[serde(rename = "L")]
    pub halfline_len: Option<f64>,
    pub method: Option<String>,
    pub seed: Option<String>,
    pub path: Option<String>,
    pub beads: Option<usize>,
    pub relax: Option<usize>,
    pub jobs: Option<usize>,
    pub seed_rng: Option<u64>,
    #[serde(default)]
    pub solver: SolverOverrides,
}

/// Solver settings a config file may change.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub tol_residual: Option<f64>,
    pub tol_relative: Option<f64>,
    pub max_iter: Option<usize>,
    pub dt: Option<f64>,
    pub flow_tol: Option<f64>,
    pub flow_max_iter: Option<usize>,
    pub rho_grid: Option<Vec<f64>>,
    pub nehari_restarts: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn solver_config(&self) -> graphnls::Config {
        let mut cfg = graphnls::Config::default();
        let s = &self.solver;
        if let Some(v) = s.tol_residual {
            cfg.tol_residual = v;
        }
        if let Some(v) = s.tol_relative {
            cfg.tol_relative = v;
        }
        if let Some(v) = s.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = s.dt {
            cfg.dt = v;
        }
        if let Some(v) = s.flow_tol {
            cfg.flow_tol = v;
        }
        if let Some(v) = s.flow_max_iter {
            cfg.flow_max_iter = v;
        }
        if let Some(v) = &s.rho_grid {
            cfg.rho_grid = v.clone();
        }
        if let Some(v) = s.nehari_restarts {
            cfg.nehari_restarts = v;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"p": 7, "bogus": 1}"#).is_err());
        let c: FileConfig = serde_json::from_str(r#"{"p": 7, "L": 20, "solver": {"max_iter": 5}}"#).unwrap();
        assert_eq!(c.halfline_len, Some(20.0));
        assert_eq!(c.solver_config().max_iter, 5);
    }
}
