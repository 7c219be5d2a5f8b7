//! Reduced Toda-type system for the layer corrections f̃_n(θ):
//!
//! −εγ₀f̃″_n + 6√2βγ_{1,n}k_n[e^{−√2βΔ_n} − 1] − 6√2βγ_{2,n}k_{n+1}[e^{−√2βΔ_{n+1}} − 1] = h_n,
//!
//! with Δ_n = f̃_n − f̃_{n−1} and f̃₀ = −f̃₁, on a uniform periodic θ grid.

pub mod eigen;
pub mod resonance;

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::numerics::{norm_inf, BlockTridiagonal, CyclicBlockTridiagonal};
use crate::placement::{Placement, PlacementError};
use crate::profile::{weighted_gammas, CutoffFamily, ProfileError, GAMMA0, GAMMA1};

pub use eigen::{EigenRegistry, EigenStrategy, PeriodicOperator};
pub use resonance::{analytic_resonances, resonance_scan, ResonanceScan};

/// Smallest admissible θ grid.
pub const MIN_NODES: usize = 64;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TodaError {
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("ε = {eps:.6e} is resonant: spectral gap {gap:.3e} below {threshold:.3e}")]
    Resonant { eps: f64, gap: f64, threshold: f64 },
    #[error("Newton did not converge; residual trace {0:?}")]
    Divergence(Vec<f64>),
    #[error("eigensolver failed to converge")]
    EigenFailure,
    #[error("unknown eigen strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Coefficient tables of the reduced system, `[n][node]` for 0-based layer n.
#[derive(Debug, Clone, Serialize)]
pub struct TodaSystem {
    pub n: usize,
    pub eps: f64,
    pub length: f64,
    pub gamma0: f64,
    pub beta: Vec<f64>,
    /// 6√2βγ_{1,n}k_n
    pub lower_force: Vec<Vec<f64>>,
    /// 6√2βγ_{2,n}k_{n+1}
    pub upper_force: Vec<Vec<f64>>,
    /// 𝔠_n = 12β²γ_{1,n}k_n
    pub c: Vec<Vec<f64>>,
    /// 𝔡_n = 12β²γ_{2,n}k_{n+1}
    pub d: Vec<Vec<f64>>,
    /// 𝔞_{n} = 12β²γ₁k_{n+1}
    pub a: Vec<Vec<f64>>,
}

impl TodaSystem {
    pub fn nodes(&self) -> usize {
        self.beta.len()
    }

    pub fn step(&self) -> f64 {
        self.length / self.nodes() as f64
    }

    /// Layer coupling B(θ_i) so that the linear part reads −εγ₀f̃″ − Bf̃.
    pub fn coupling(&self, i: usize) -> DMatrix<f64> {
        self.coupling_scaled(i, &vec![1.0; self.n + 1])
    }

    /// B with 𝔠_n scaled by `w[n]` and 𝔡_n by `w[n + 1]` (Newton linearization).
    fn coupling_scaled(&self, i: usize, w: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut b = DMatrix::zeros(n, n);
        for r in 0..n {
            let c = self.c[r][i] * w[r];
            let d = self.d[r][i] * w[r + 1];
            if r == 0 {
                b[(0, 0)] += 2.0 * c;
            } else {
                b[(r, r)] += c;
                b[(r, r - 1)] -= c;
            }
            if r + 1 < n {
                b[(r, r)] += d;
                b[(r, r + 1)] -= d;
            }
        }
        b
    }

    /// A(θ_i) = Eᵀ diag(2𝔞₀, 𝔞₁, …, 𝔞_{N−1}) E with E the difference matrix.
    pub fn matrix_a(&self, i: usize) -> DMatrix<f64> {
        let n = self.n;
        let e = difference_matrix(n);
        let mut dg = DMatrix::zeros(n, n);
        for j in 0..n {
            dg[(j, j)] = if j == 0 { 2.0 * self.a[0][i] } else { self.a[j][i] };
        }
        e.transpose() * dg * e
    }

    /// Eigenvalues ρ_1 ≤ … ≤ ρ_N of B(θ_i). The two-sided couplings are
    /// symmetrized through √(𝔡_n𝔠_{n+1}), which preserves the spectrum.
    pub fn rho(&self, i: usize) -> Vec<f64> {
        let b = self.coupling(i);
        let n = self.n;
        let mut s = b.clone();
        for r in 0..n.saturating_sub(1) {
            let p = b[(r, r + 1)] * b[(r + 1, r)];
            let v = -p.max(0.0).sqrt();
            s[(r, r + 1)] = v;
            s[(r + 1, r)] = v;
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// ρ_n(θ) for every node, `[n][node]`.
    pub fn rho_table(&self) -> Vec<Vec<f64>> {
        let per: Vec<Vec<f64>> = (0..self.nodes()).into_par_iter().map(|i| self.rho(i)).collect();
        (0..self.n).map(|n| per.iter().map(|r| r[n]).collect()).collect()
    }

    /// The periodic operator −εγ₀D² − ρ_n(θ) for layer mode n.
    pub fn mode_operator(&self, rho: &[f64]) -> PeriodicOperator {
        PeriodicOperator {
            kappa: self.eps * self.gamma0,
            h: self.step(),
            rho: rho.to_vec(),
        }
    }
}

/// E with (Ef)_1 = f_1 and (Ef)_n = f_n − f_{n−1}.
pub fn difference_matrix(n: usize) -> DMatrix<f64> {
    let mut e = DMatrix::identity(n, n);
    for r in 1..n {
        e[(r, r - 1)] = -1.0;
    }
    e
}

/// Builds the system from a placement on a uniform grid of length `length`.
/// With `delta_tilde` the γ's are cutoff-weighted per layer and node.
pub fn assemble_system(placement: &Placement, length: f64, delta_tilde: Option<f64>) -> Result<TodaSystem, TodaError> {
    let m = placement.layers.nodes();
    let n = placement.n;
    if m < MIN_NODES {
        return Err(TodaError::Invalid(format!("θ grid has {m} nodes; at least {MIN_NODES} are required")));
    }
    if let Some(i) = placement.mean_curvature.iter().position(|&h| !(h > 0.0)) {
        return Err(TodaError::Invalid(format!(
            "generalized mean curvature {} ≤ 0 at node {i}; the reduced system is indefinite",
            placement.mean_curvature[i]
        )));
    }
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let beta = placement.beta[i];
            match delta_tilde {
                None => Ok((vec![GAMMA1; n], vec![GAMMA1; n])),
                Some(dt) => {
                    let f = placement.layers.at(i);
                    let cut = CutoffFamily::new(&f, beta, dt)?;
                    let mut g1 = Vec::with_capacity(n);
                    let mut g2 = Vec::with_capacity(n);
                    for j in 1..=n {
                        let (_, a, b) = weighted_gammas(&cut, j, f[j - 1], beta);
                        g1.push(a);
                        g2.push(b);
                    }
                    Ok((g1, g2))
                }
            }
        })
        .collect::<Result<_, ProfileError>>()?;
    let mut sys = TodaSystem {
        n,
        eps: placement.eps,
        length,
        gamma0: GAMMA0,
        beta: placement.beta.clone(),
        lower_force: vec![vec![0.0; m]; n],
        upper_force: vec![vec![0.0; m]; n],
        c: vec![vec![0.0; m]; n],
        d: vec![vec![0.0; m]; n],
        a: vec![vec![0.0; m]; n],
    };
    for i in 0..m {
        let beta = placement.beta[i];
        let k = &placement.coeffs[i].k;
        for j in 0..n {
            let (g1, g2) = (rows[i].0[j], rows[i].1[j]);
            sys.lower_force[j][i] = 6.0 * SQRT_2 * beta * g1 * k[j];
            sys.upper_force[j][i] = 6.0 * SQRT_2 * beta * g2 * k[j + 1];
            sys.c[j][i] = 12.0 * beta * beta * g1 * k[j];
            sys.d[j][i] = 12.0 * beta * beta * g2 * k[j + 1];
            sys.a[j][i] = placement.coeffs[i].a[j];
        }
    }
    Ok(sys)
}

/// Left side of the reduced system split into its linear part and the
/// quadratic remainder 𝒥; `full = linear + remainder`.
#[derive(Debug, Clone, Serialize)]
pub struct TodaResidual {
    pub full: Vec<Vec<f64>>,
    pub linear: Vec<Vec<f64>>,
    pub remainder: Vec<Vec<f64>>,
}

fn gap(f: &[Vec<f64>], n: usize, i: usize) -> f64 {
    if n == 0 {
        2.0 * f[0][i]
    } else {
        f[n][i] - f[n - 1][i]
    }
}

/// Evaluates the left side at f̃ (`[n][node]`).
pub fn nonlinear_residual(sys: &TodaSystem, f: &[Vec<f64>]) -> TodaResidual {
    let (n, m) = (sys.n, sys.nodes());
    let kappa = sys.eps * sys.gamma0 / (sys.step() * sys.step());
    let mut out = TodaResidual {
        full: vec![vec![0.0; m]; n],
        linear: vec![vec![0.0; m]; n],
        remainder: vec![vec![0.0; m]; n],
    };
    for j in 0..n {
        for i in 0..m {
            let (ip, im) = ((i + 1) % m, (i + m - 1) % m);
            let lap = -kappa * (f[j][ip] - 2.0 * f[j][i] + f[j][im]);
            let sb = SQRT_2 * sys.beta[i];
            let x = sb * gap(f, j, i);
            let lower = sys.lower_force[j][i];
            let mut lin = lap - lower * x;
            let mut rem = lower * ((-x).exp() - 1.0 + x);
            if j + 1 < n {
                let y = sb * gap(f, j + 1, i);
                let upper = sys.upper_force[j][i];
                lin += upper * y;
                rem -= upper * ((-y).exp() - 1.0 + y);
            }
            out.linear[j][i] = lin;
            out.remainder[j][i] = rem;
            out.full[j][i] = lin + rem;
        }
    }
    out
}

/// Newton outcome for the reduced system.
#[derive(Debug, Clone, Serialize)]
pub struct TodaSolution {
    pub f: Vec<Vec<f64>>,
    pub residual_trace: Vec<f64>,
    /// r_{k+1}/r_k² along the trace.
    pub quadratic_ratios: Vec<f64>,
    pub sup_norm: f64,
    pub h_l2: f64,
    /// ‖f̃‖∞ ε^{1/2} / ‖h‖_{L²}.
    pub stability_constant: f64,
    pub gap: f64,
    /// ‖f̃‖∞ / ε^{1/2}, to compare with the ε^{σ} window.
    pub window_ratio: f64,
}

/// L² norm on the periodic grid.
pub fn l2_norm(sys: &TodaSystem, h: &[Vec<f64>]) -> f64 {
    (h.iter().flatten().map(|v| v * v).sum::<f64>() * sys.step()).sqrt()
}

/// Smallest |eigenvalue| over all layer modes.
pub fn spectral_gap(sys: &TodaSystem, strategy: &dyn EigenStrategy) -> Result<f64, TodaError> {
    let table = sys.rho_table();
    let mut g = f64::INFINITY;
    for rho in &table {
        g = g.min(strategy.min_abs_eigenvalue(&sys.mode_operator(rho))?);
    }
    Ok(g)
}

/// Damped Newton for f̃ with forcing h; refuses ε whose gap is below
/// `threshold`·ε.
pub fn solve_tilde_f(sys: &TodaSystem, h: &[Vec<f64>], threshold: f64, tol: f64) -> Result<TodaSolution, TodaError> {
    let (n, m) = (sys.n, sys.nodes());
    if h.len() != n || h.iter().any(|r| r.len() != m) {
        return Err(TodaError::Invalid("forcing shape does not match the system".into()));
    }
    let gap_value = spectral_gap(sys, &eigen::Sturm)?;
    if gap_value < threshold * sys.eps {
        return Err(TodaError::Resonant {
            eps: sys.eps,
            gap: gap_value,
            threshold: threshold * sys.eps,
        });
    }
    let kappa = sys.eps * sys.gamma0 / (sys.step() * sys.step());
    let mut f = vec![vec![0.0; m]; n];
    let residual = |f: &[Vec<f64>]| -> Vec<f64> {
        let r = nonlinear_residual(sys, f);
        // node-major layout for the block solver
        let mut out = vec![0.0; n * m];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = r.full[j][i] - h[j][i];
            }
        }
        out
    };
    let mut r = residual(&f);
    let mut trace = vec![norm_inf(&r)];
    for _ in 0..50 {
        if *trace.last().unwrap() < tol {
            break;
        }
        let mut bt = BlockTridiagonal::zeros(m, n);
        for i in 0..m {
            // derivative of the exponentials scales 𝔠_n by e^{−√2βΔ_n}
            let sb = SQRT_2 * sys.beta[i];
            let w: Vec<f64> = (0..=n)
                .map(|j| if j < n { (-sb * gap(&f, j, i)).exp() } else { 1.0 })
                .collect();
            let b = sys.coupling_scaled(i, &w);
            bt.diag[i] = DMatrix::identity(n, n) * (2.0 * kappa) - b;
            bt.lower[i] = DMatrix::identity(n, n) * (-kappa);
            bt.upper[i] = DMatrix::identity(n, n) * (-kappa);
        }
        let lu = CyclicBlockTridiagonal(bt)
            .factor()
            .ok_or_else(|| TodaError::Divergence(trace.clone()))?;
        let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut delta);
        let r0 = *trace.last().unwrap();
        let mut lambda = 1.0;
        loop {
            let trial: Vec<Vec<f64>> = (0..n)
                .map(|j| (0..m).map(|i| f[j][i] + lambda * delta[i * n + j]).collect())
                .collect();
            let rt = residual(&trial);
            let rn = norm_inf(&rt);
            if rn < r0 || rn < tol {
                f = trial;
                r = rt;
                trace.push(rn);
                break;
            }
            lambda *= 0.5;
            if lambda < 1.0 / 4096.0 {
                return Err(TodaError::Divergence(trace));
            }
        }
    }
    if *trace.last().unwrap() >= tol {
        return Err(TodaError::Divergence(trace));
    }
    let quadratic_ratios = trace
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] / (w[0] * w[0]))
        .collect();
    let sup_norm = f.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let h_l2 = l2_norm(sys, h);
    Ok(TodaSolution {
        stability_constant: if h_l2 > 0.0 { sup_norm * sys.eps.sqrt() / h_l2 } else { 0.0 },
        window_ratio: sup_norm / sys.eps.sqrt(),
        f,
        residual_trace: trace,
        quadratic_ratios,
        sup_norm,
        h_l2,
        gap: gap_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryTraces;
    use crate::placement::place;
    use std::f64::consts::PI;

    fn circle(n: usize, eps: f64, m: usize) -> TodaSystem {
        let tr = BoundaryTraces::uniform(2.0 * PI, m, 1.0, 1.0, 0.0, 0.0);
        let p = place(&tr, n, eps, Default::default()).unwrap();
        assemble_system(&p, 2.0 * PI, None).unwrap()
    }

    #[test]
    fn single_layer_coupling_is_twice_a0() {
        let sys = circle(1, 0.01, 64);
        let b = sys.coupling(0);
        assert!((b[(0, 0)] - 8.0 / 3.0).abs() < 1e-9);
        assert!((sys.rho(0)[0] - 8.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn congruence_diagonalizes_a() {
        let sys = circle(3, 0.001, 64);
        let a = sys.matrix_a(5);
        let q = difference_matrix(3).try_inverse().unwrap().transpose();
        let d = &q * &a * q.transpose();
        let want = [2.0 * sys.a[0][5], sys.a[1][5], sys.a[2][5]];
        for r in 0..3 {
            for c in 0..3 {
                let w = if r == c { want[r] } else { 0.0 };
                assert!((d[(r, c)] - w).abs() < 1e-10, "({r},{c})");
            }
        }
        // unweighted: A and B coincide
        assert!((a - sys.coupling(5)).abs().max() < 1e-10);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let sys = circle(2, 0.003, 64);
        let h = vec![vec![0.0; 64]; 2];
        let sol = solve_tilde_f(&sys, &h, 0.1, 1e-11).unwrap();
        assert_eq!(sol.sup_norm, 0.0);
    }

    #[test]
    fn remainder_is_quadratic() {
        let sys = circle(2, 0.003, 64);
        let shape: Vec<Vec<f64>> = (0..2)
            .map(|j| (0..64).map(|i| ((i + 3 * j) as f64 * 0.2).sin() + 0.5 * j as f64).collect())
            .collect();
        let ts = [1e-2, 1e-3, 1e-4];
        let norms: Vec<f64> = ts
            .iter()
            .map(|t| {
                let f: Vec<Vec<f64>> = shape.iter().map(|r| r.iter().map(|v| t * v).collect()).collect();
                let r = nonlinear_residual(&sys, &f);
                r.remainder.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
            })
            .collect();
        let fit = crate::numerics::log_log_fit(&ts, &norms);
        assert!((fit.slope - 2.0).abs() < 0.05, "slope {}", fit.slope);
    }
}
