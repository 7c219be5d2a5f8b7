//! Clustered boundary transition layers for the inhomogeneous Allen-Cahn
//! equation ε²Δu + V(y)(1 − u²)u = 0 with Neumann boundary conditions.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod experiment;
pub mod geometry;
pub mod numerics;
pub mod pde;
pub mod placement;
pub mod profile;
pub mod strip_linear;
pub mod toda;
