//! Normalized solutions of the stationary nonlinear Schrödinger equation
//! `u'' + ρ|u|^{p-2}u = λu` on metric graphs with Kirchhoff vertex conditions.

// `!(x > 0)` also rejects NaN; index loops mirror the stencil formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fem;
pub mod graph;
pub mod linalg;
pub mod mountain_pass;
pub mod quadrature;
pub mod scalar;
pub mod soliton;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instances of the generic types.
pub type Graph = graph::MetricGraph<f64>;
pub type Space = fem::FemSpace<f64>;
pub type Function = fem::GridFunction<f64>;
pub type Solution = solver::StationarySolution<f64>;
pub type Config = solver::SolverConfig<f64>;
pub type Path = mountain_pass::PathOnSphere<f64>;
pub type MountainPassConfig = mountain_pass::MPConfig<f64>;
