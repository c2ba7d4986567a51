//! Flag/config resolution and graph loading shared by the subcommands.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Args;
use graphnls::Graph;

use crate::config::FileConfig;
use crate::output::RunManifest;

/// A malformed or missing argument; reported with exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Graph, exponent, mass and mesh flags.
#[derive(Args, Clone, Debug, Default)]
pub struct ProblemArgs {
    /// Graph file (JSON).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Nonlinearity exponent p.
    #[arg(long)]
    pub p: Option<f64>,
    /// Prescribed mass.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Nonlinearity strength rho in (0, 1].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Maximum element size (default: a fraction of the soliton width).
    #[arg(long)]
    pub h: Option<f64>,
    /// Truncation length of every half-line.
    #[arg(long = "L", value_name = "L")]
    pub halfline_len: Option<f64>,
}

/// Global settings: the config file and the RNG seed.
pub struct Ctx {
    pub cfg: FileConfig,
    pub seed_rng: u64,
}

pub const DEFAULT_HALFLINE_LEN: f64 = 30.0;

impl Ctx {
    pub fn p(&self, flag: Option<f64>) -> Result<f64> {
        flag.or(self.cfg.p).ok_or_else(|| usage("--p is required"))
    }

    pub fn mu_opt(&self, flag: Option<f64>) -> Option<f64> {
        flag.or(self.cfg.mu)
    }

    pub fn mu(&self, flag: Option<f64>) -> Result<f64> {
        self.mu_opt(flag).ok_or_else(|| usage("--mu is required"))
    }

    pub fn rho(&self, flag: Option<f64>) -> f64 {
        flag.or(self.cfg.rho).unwrap_or(1.0)
    }

    pub fn lambda(&self, flag: Option<f64>) -> Option<f64> {
        flag.or(self.cfg.lambda)
    }

    pub fn h(&self, flag: Option<f64>) -> Option<f64> {
        flag.or(self.cfg.h)
    }

    pub fn halfline_len(&self, flag: Option<f64>) -> f64 {
        flag.or(self.cfg.halfline_len).unwrap_or(DEFAULT_HALFLINE_LEN)
    }

    pub fn solver(&self) -> graphnls::Config {
        self.cfg.solver_config()
    }
}

/// Parses and validates a graph file, keeping its bytes for the manifest hash.
pub fn load_graph(path: &Path) -> Result<(Graph, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading graph {}", path.display()))?;
    let text = std::str::from_utf8(&bytes).with_context(|| format!("graph {} is not UTF-8", path.display()))?;
    let g = Graph::from_json_str(text).with_context(|| format!("loading graph {}", path.display()))?;
    Ok((g, bytes))
}

pub fn require_graph(flag: &Option<PathBuf>) -> Result<(Graph, RunManifest)> {
    let path = flag.as_deref().ok_or_else(|| usage("--graph is required"))?;
    let (g, bytes) = load_graph(path)?;
    Ok((g, RunManifest::new().with_graph(path, &bytes)))
}
