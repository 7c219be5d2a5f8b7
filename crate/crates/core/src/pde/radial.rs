//! Radial Allen-Cahn on the unit disk: ε²(u″ + u′/r) + V(r)(1 − u²)u = 0 with
//! u′(0) = u′(1) = 0, discretized by vertex-centred finite volumes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryCurve, Geometry, Potential, RadialPotential};
use crate::numerics::{norm2, norm_inf, solve_tridiagonal};
use crate::placement::{place, Prediction};
use crate::profile::nonlinearity;

use super::ansatz::ansatz_profile;
use super::grid::RadialGrid;
use super::layers::{extract_crossings, LayerTrace, NOISE_FLOOR};
use super::{NewtonStep, PdeError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadialOptions {
    pub tol: f64,
    pub max_newton: usize,
    /// Fall back to ε-continuation from 2ε when the cold start fails.
    pub continuation: bool,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 60,
            continuation: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub eps: f64,
    pub grid: RadialGrid,
    pub u: Vec<f64>,
    pub trace: Vec<NewtonStep>,
    pub residual_inf: f64,
    /// Zero crossings in stretched depth s = (1 − r)/ε, sorted outward-in.
    pub layers: LayerTrace,
    pub predicted: Prediction,
    pub continuation_used: bool,
}

/// Discrete radial operator on a fixed grid.
pub struct RadialOperator<'a> {
    r: &'a [f64],
    eps: f64,
    v: Vec<f64>,
    // face radii, face spacings and cell areas
    rp: Vec<f64>,
    dp: Vec<f64>,
    area: Vec<f64>,
}

impl<'a> RadialOperator<'a> {
    pub fn new(grid: &'a RadialGrid, eps: f64, v: impl Fn(f64) -> f64) -> Self {
        let r = &grid.r;
        let n = r.len();
        let rp: Vec<f64> = (0..n - 1).map(|i| 0.5 * (r[i] + r[i + 1])).collect();
        let dp: Vec<f64> = (0..n - 1).map(|i| r[i + 1] - r[i]).collect();
        let area = (0..n)
            .map(|i| {
                let hi = if i + 1 < n { rp[i] } else { 1.0 };
                let lo = if i > 0 { rp[i - 1] } else { 0.0 };
                0.5 * (hi * hi - lo * lo)
            })
            .collect();
        Self {
            r,
            eps,
            v: r.iter().map(|&r| v(r)).collect(),
            rp,
            dp,
            area,
        }
    }

    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let e2 = self.eps * self.eps;
        (0..n)
            .map(|i| {
                let out = if i + 1 < n { self.rp[i] * (u[i + 1] - u[i]) / self.dp[i] } else { 0.0 };
                let inn = if i > 0 { self.rp[i - 1] * (u[i] - u[i - 1]) / self.dp[i - 1] } else { 0.0 };
                e2 * (out - inn) / self.area[i] + self.v[i] * nonlinearity(u[i])
            })
            .collect()
    }

    /// (lower, diag, upper) of the Jacobian.
    pub fn jacobian(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = u.len();
        let e2 = self.eps * self.eps;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let a = e2 / self.area[i];
            if i + 1 < n {
                let c = a * self.rp[i] / self.dp[i];
                upper[i] = c;
                diag[i] -= c;
            }
            if i > 0 {
                let c = a * self.rp[i - 1] / self.dp[i - 1];
                lower[i] = c;
                diag[i] -= c;
            }
            diag[i] += self.v[i] * (1.0 - 3.0 * u[i] * u[i]);
        }
        (lower, diag, upper)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Damped Newton with Armijo backtracking (floor 2⁻¹²) from `u`.
pub fn newton_radial(op: &RadialOperator, mut u: Vec<f64>, opts: &RadialOptions) -> Result<(Vec<f64>, Vec<NewtonStep>), Vec<NewtonStep>> {
    let mut trace = Vec::new();
    let mut r = op.residual(&u);
    let mut damping = 0.0;
    for it in 0..=opts.max_newton {
        let (ri, r2) = (norm_inf(&r), norm2(&r));
        trace.push(NewtonStep {
            iteration: it,
            eps: op.eps,
            residual_inf: ri,
            residual_l2: r2,
            damping,
            linear_iterations: 1,
            linear_residual: 0.0,
        });
        if ri < opts.tol {
            return Ok((u, trace));
        }
        if it == opts.max_newton || !ri.is_finite() {
            break;
        }
        let (lo, di, up) = op.jacobian(&u);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_tridiagonal(&lo, &di, &up, &rhs);
        if delta.iter().any(|d| !d.is_finite()) {
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1.0 / 4096.0 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let rt = op.residual(&trial);
            if norm2(&rt) <= (1.0 - 1e-4 * lambda) * r2 {
                u = trial;
                r = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        damping = lambda;
    }
    Err(trace)
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    let k = x.partition_point(|&v| v < at).clamp(1, x.len() - 1);
    let w = (at - x[k - 1]) / (x[k] - x[k - 1]);
    y[k - 1] + w * (y[k] - y[k - 1])
}

fn crossings(grid: &RadialGrid, u: &[f64], eps: f64) -> LayerTrace {
    // outward-in order: s = (1 − r)/ε ascending
    let s: Vec<f64> = grid.r.iter().rev().map(|r| (1.0 - r) / eps).collect();
    let v: Vec<f64> = u.iter().rev().copied().collect();
    let c = extract_crossings(&s, &v, NOISE_FLOOR);
    LayerTrace {
        eps,
        theta: vec![0.0],
        unresolved: if c.unresolved { vec![0] } else { vec![] },
        depths: vec![c.depths],
    }
}

/// Radial solve with N layers on the unit disk for V(r) = Σ c_k r^k.
pub fn solve_radial(n: usize, eps: f64, potential: &RadialPotential, opts: &RadialOptions) -> Result<RadialSolution, PdeError> {
    solve_radial_depth(n, eps, potential, opts, 0)
}

fn solve_radial_depth(n: usize, eps: f64, potential: &RadialPotential, opts: &RadialOptions, depth: usize) -> Result<RadialSolution, PdeError> {
    let pot = RadialPotential {
        center: [0.0, 0.0],
        coeffs: potential.coeffs.clone(),
    };
    let geo = Geometry::new(Arc::new(BoundaryCurve::circle(1.0, 64)?), Arc::new(pot.clone()));
    let traces = geo.traces(4)?;
    let placement = place(&traces, n, eps, Default::default())?;
    let f = placement.layers.at(0);
    let beta = placement.beta[0];
    let deepest = *f.last().unwrap();
    if eps * (deepest + 6.0 / beta) > 0.9 {
        return Err(PdeError::LayersOutsideGrid {
            depth: deepest,
            s_max: 0.9 / eps,
            eps_fit: 0.9 / (deepest + 6.0 / beta),
        });
    }
    let grid = RadialGrid::for_layers(eps, deepest)?;
    let v = |r: f64| pot.value([r, 0.0]);
    let op = RadialOperator::new(&grid, eps, v);
    let guess: Vec<f64> = grid.r.iter().map(|&r| ansatz_profile((1.0 - r) / eps, &f, beta)).collect();
    let predicted = placement.predicted[0].clone();
    let finish = |u: Vec<f64>, trace: Vec<NewtonStep>, continuation_used: bool| {
        let layers = crossings(&grid, &u, eps);
        let found = layers.depths[0].len();
        if found != n {
            return Err(PdeError::BranchMismatch { expected: n, found, trace });
        }
        Ok(RadialSolution {
            eps,
            grid: grid.clone(),
            residual_inf: trace.last().map_or(f64::NAN, |s| s.residual_inf),
            u,
            trace,
            layers,
            predicted: predicted.clone(),
            continuation_used,
        })
    };
    let cold = newton_radial(&op, guess, opts);
    let cold_trace = match cold {
        Ok((u, trace)) => match finish(u, trace, false) {
            Ok(sol) => return Ok(sol),
            Err(e) if !opts.continuation || depth >= 3 => return Err(e),
            Err(PdeError::BranchMismatch { trace, .. }) => trace,
            Err(e) => return Err(e),
        },
        Err(trace) => trace,
    };
    if !opts.continuation || depth >= 3 || 2.0 * eps >= 1.0 / n as f64 {
        return Err(PdeError::Divergence { trace: cold_trace });
    }
    // march from 2ε down to ε in four geometric steps
    let start = solve_radial_depth(n, 2.0 * eps, potential, opts, depth + 1)?;
    let mut trace = cold_trace;
    trace.extend(start.trace.iter().copied());
    let (mut r_prev, mut u_prev) = (start.grid.r.clone(), start.u.clone());
    for k in 1..=4 {
        let e = 2.0 * eps * 0.5f64.powf(k as f64 / 4.0);
        let g = if k == 4 { grid.clone() } else { RadialGrid::for_layers(e, deepest)? };
        let op_k = RadialOperator::new(&g, e, v);
        let guess: Vec<f64> = g.r.iter().map(|&r| interpolate(&r_prev, &u_prev, r)).collect();
        match newton_radial(&op_k, guess, opts) {
            Ok((u, t)) => {
                trace.extend(t);
                r_prev = g.r.clone();
                u_prev = u;
            }
            Err(t) => {
                trace.extend(t);
                return Err(PdeError::Divergence { trace });
            }
        }
    }
    finish(u_prev, trace, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_is_a_fixed_point() {
        let grid = RadialGrid::for_layers(0.02, 3.0).unwrap();
        let op = RadialOperator::new(&grid, 0.02, |_| 1.0);
        let (u, trace) = newton_radial(&op, vec![-1.0; grid.len()], &RadialOptions::default()).unwrap();
        assert_eq!(trace.len(), 1);
        assert!(u.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let grid = RadialGrid::graded(0.1, 0.5, 0.02, 1.1, 0.1).unwrap();
        let op = RadialOperator::new(&grid, 0.1, |r| 1.0 + r * r);
        let u: Vec<f64> = grid.r.iter().map(|r| (5.0 * r).sin()).collect();
        let (lo, di, up) = op.jacobian(&u);
        let h = 1e-6;
        for k in [0, 3, grid.len() / 2, grid.len() - 1] {
            let mut a = u.clone();
            let mut b = u.clone();
            a[k] += h;
            b[k] -= h;
            let (ra, rb) = (op.residual(&a), op.residual(&b));
            let col = |i: usize| (ra[i] - rb[i]) / (2.0 * h);
            assert!((col(k) - di[k]).abs() < 1e-5 * di[k].abs().max(1.0));
            if k > 0 {
                assert!((col(k - 1) - up[k - 1]).abs() < 1e-5 * up[k - 1].abs().max(1.0));
            }
            if k + 1 < grid.len() {
                assert!((col(k + 1) - lo[k + 1]).abs() < 1e-5 * lo[k + 1].abs().max(1.0));
            }
        }
    }

    #[test]
    fn operator_is_exact_on_quadratics() {
        // Δ(r²) = 4 in the finite-volume sense away from the boundary flux
        let grid = RadialGrid::graded(0.05, 0.3, 0.01, 1.05, 0.05).unwrap();
        let op = RadialOperator::new(&grid, 1.0, |_| 0.0);
        let u: Vec<f64> = grid.r.iter().map(|r| r * r).collect();
        let res = op.residual(&u);
        for i in 0..grid.len() - 1 {
            assert!((res[i] - 4.0).abs() < 1e-9, "i={i}: {}", res[i]);
        }
    }
}
