//! Numerical kernels shared by the solvers.

pub mod block;
pub mod fit;
pub mod gmres;
pub mod quadrature;
pub mod spline;
pub mod tridiag;

pub use block::{BlockTridiagonal, CyclicBlockTridiagonal};
pub use fit::{linear_fit, log_log_fit, LinearFit};
pub use gmres::{gmres, GmresOptions, GmresOutcome};
pub use quadrature::{adaptive_simpson, GaussLegendre};
pub use spline::PeriodicSpline;
pub use tridiag::{solve_cyclic_tridiagonal, solve_tridiagonal, TridiagonalFactor};

/// Max-norm of a slice.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Euclidean norm of a slice.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
