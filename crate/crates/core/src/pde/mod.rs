//! Full nonlinear solves: the radial problem on the unit disk and the Fermi
//! strip along a general boundary curve, seeded by the first approximation u₁.

pub mod ansatz;
pub mod grid;
pub mod layers;
pub mod precond;
pub mod radial;
pub mod strip;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::placement::PlacementError;

pub use ansatz::{ansatz_profile, build_u1, far_value};
pub use grid::{CollarField, RadialGrid, StripGrid};
pub use layers::{compare_to_theory, extract_crossings, extract_layers, LayerDelta, LayerTrace};
pub use precond::{Preconditioner, PreconditionerRegistry};
pub use radial::{solve_radial, RadialOptions, RadialSolution};
pub use strip::{
    initial_guess, newton_strip, residual_strip, solve_strip, strip_grid, OperatorForm, ResidualNorms, StripOptions, StripProblem,
    StripSolution,
};

/// One damped Newton step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonStep {
    pub iteration: usize,
    pub eps: f64,
    pub residual_inf: f64,
    pub residual_l2: f64,
    /// Accepted damping factor; 0 for the final residual evaluation.
    pub damping: f64,
    pub linear_iterations: usize,
    pub linear_residual: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PdeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("deepest layer at s = {depth:.3} does not fit below s_max = {s_max:.3}; ε ≤ {eps_fit:.4e} would fit")]
    LayersOutsideGrid { depth: f64, s_max: f64, eps_fit: f64 },
    #[error("Newton did not converge after {} steps (last residual {:.3e})", trace.len(), trace.last().map_or(f64::NAN, |s| s.residual_inf))]
    Divergence { trace: Vec<NewtonStep> },
    #[error("solution landed on another branch: expected {expected} layers, found {found}")]
    BranchMismatch { expected: usize, found: usize, trace: Vec<NewtonStep> },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("unknown preconditioner {0:?}")]
    UnknownPreconditioner(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}
