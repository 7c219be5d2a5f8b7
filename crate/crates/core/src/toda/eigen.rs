//! Smallest |eigenvalue| of the periodic operator v ↦ −κv″ − ρ(θ)v, selected by name.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use super::TodaError;

/// Periodic operator −κ D² − diag(ρ) on M uniform nodes of spacing h.
#[derive(Debug, Clone)]
pub struct PeriodicOperator {
    pub kappa: f64,
    pub h: f64,
    pub rho: Vec<f64>,
}

impl PeriodicOperator {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Second-difference matrix form.
    pub fn dense_fd(&self) -> DMatrix<f64> {
        let m = self.len();
        let c = self.kappa / (self.h * self.h);
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = 2.0 * c - self.rho[i];
            a[(i, (i + 1) % m)] -= c;
            a[(i, (i + m - 1) % m)] -= c;
        }
        a
    }

    /// Fourier differentiation form (M even).
    pub fn dense_spectral(&self) -> DMatrix<f64> {
        let m = self.len();
        let period = self.h * m as f64;
        // −D² entries from the cosine series of the symbol ω_k² over |k| < M/2 plus Nyquist
        let mut col = vec![0.0; m];
        for (d, c) in col.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in -(m as i64 / 2)..=(m as i64 / 2) {
                let w = 2.0 * PI * k as f64 / period;
                let weight = if m.is_multiple_of(2) && k.unsigned_abs() as usize == m / 2 { 0.5 } else { 1.0 };
                s += weight * w * w * (2.0 * PI * k as f64 * d as f64 / m as f64).cos();
            }
            *c = s / m as f64;
        }
        DMatrix::from_fn(m, m, |i, j| {
            let d = (i as i64 - j as i64).rem_euclid(m as i64) as usize;
            self.kappa * col[d] - if i == j { self.rho[i] } else { 0.0 }
        })
    }
}

pub trait EigenStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn min_abs_eigenvalue(&self, op: &PeriodicOperator) -> Result<f64, TodaError>;
}

type Factory = fn() -> Box<dyn EigenStrategy>;

pub struct EigenRegistry {
    entries: BTreeMap<&'static str, Factory>,
}

impl Default for EigenRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register("sturm", || Box::new(Sturm));
        r.register("dense", || Box::new(Dense));
        r.register("spectral", || Box::new(Spectral));
        r
    }
}

impl EigenRegistry {
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn EigenStrategy>, TodaError> {
        self.entries
            .get(name)
            .map(|f| f())
            .ok_or_else(|| TodaError::UnknownStrategy(name.to_string()))
    }
}

/// Inertia bisection on the cyclic tridiagonal second-difference form.
pub struct Sturm;

impl Sturm {
    /// Number of eigenvalues below σ. The last row and column are split off and
    /// handled through their Schur complement.
    pub fn count_below(op: &PeriodicOperator, sigma: f64) -> usize {
        let m = op.len();
        let c = op.kappa / (op.h * op.h);
        let diag = |i: usize| 2.0 * c - op.rho[i] - sigma;
        if m == 1 {
            return usize::from(-op.rho[0] - sigma < 0.0);
        }
        if m == 2 {
            let a = DMatrix::from_row_slice(2, 2, &[diag(0), -2.0 * c, -2.0 * c, diag(1)]);
            return SymmetricEigen::new(a).eigenvalues.iter().filter(|&&v| v < 0.0).count();
        }
        let n = m - 1;
        // LDLᵀ pivots of the leading (M−1) block
        let mut piv = vec![0.0; n];
        let mut neg = 0;
        for i in 0..n {
            let mut p = diag(i);
            if i > 0 {
                p -= c * c / piv[i - 1];
            }
            if p == 0.0 {
                p = -f64::EPSILON * c.max(1.0);
            }
            if p < 0.0 {
                neg += 1;
            }
            piv[i] = p;
        }
        // solve T_int x = b, b = (−c at row 0, −c at row n−1)
        let mut y = vec![0.0; n];
        y[0] = -c;
        y[n - 1] += -c;
        // forward: L y' = b with L sub-diagonal −c/piv
        for i in 1..n {
            y[i] -= (-c / piv[i - 1]) * y[i - 1];
        }
        // D and Lᵀ
        let mut x = vec![0.0; n];
        x[n - 1] = y[n - 1] / piv[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = y[i] / piv[i] - (-c / piv[i]) * x[i + 1];
        }
        let schur = diag(n) - (-c * x[0] + -c * x[n - 1]);
        neg + usize::from(schur < 0.0)
    }

    /// k-th smallest eigenvalue (0-based) by bisection.
    pub fn kth(op: &PeriodicOperator, k: usize, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Self::count_below(op, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(1e-300) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

impl EigenStrategy for Sturm {
    fn name(&self) -> &'static str {
        "sturm"
    }

    fn min_abs_eigenvalue(&self, op: &PeriodicOperator) -> Result<f64, TodaError> {
        let m = op.len();
        let c = op.kappa / (op.h * op.h);
        let rmax = op.rho.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        let bound = 4.0 * c + rmax + 1.0;
        let below = Self::count_below(op, 0.0);
        let mut best = f64::INFINITY;
        if below > 0 {
            best = best.min(Self::kth(op, below - 1, -bound, 0.0).abs());
        }
        if below < m {
            best = best.min(Self::kth(op, below, 0.0, bound).abs());
        }
        Ok(best)
    }
}

fn dense_min_abs(a: DMatrix<f64>) -> Result<f64, TodaError> {
    let e = SymmetricEigen::try_new(a, 1e-14, 10_000).ok_or(TodaError::EigenFailure)?;
    Ok(e.eigenvalues.iter().fold(f64::INFINITY, |b, v| b.min(v.abs())))
}

/// Full symmetric eigensolve of the second-difference matrix.
pub struct Dense;

impl EigenStrategy for Dense {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn min_abs_eigenvalue(&self, op: &PeriodicOperator) -> Result<f64, TodaError> {
        dense_min_abs(op.dense_fd())
    }
}

/// Full symmetric eigensolve with Fourier differentiation.
pub struct Spectral;

impl EigenStrategy for Spectral {
    fn name(&self) -> &'static str {
        "spectral"
    }

    fn min_abs_eigenvalue(&self, op: &PeriodicOperator) -> Result<f64, TodaError> {
        dense_min_abs(op.dense_spectral())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(m: usize, kappa: f64, rho: impl Fn(f64) -> f64) -> PeriodicOperator {
        let l = 2.0 * PI;
        let h = l / m as f64;
        PeriodicOperator {
            kappa,
            h,
            rho: (0..m).map(|i| rho(i as f64 * h)).collect(),
        }
    }

    #[test]
    fn sturm_matches_dense() {
        let reg = EigenRegistry::default();
        for (kappa, m) in [(0.01, 64), (0.003, 97), (0.05, 40)] {
            let o = op(m, kappa, |t| 2.0 + 0.5 * t.sin());
            let a = reg.create("sturm").unwrap().min_abs_eigenvalue(&o).unwrap();
            let b = reg.create("dense").unwrap().min_abs_eigenvalue(&o).unwrap();
            // the Schur split loses accuracy inside degenerate pairs, so bisection
            // is only trusted to about 1e-9 there
            assert!((a - b).abs() < 1e-8 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn sturm_counts_match_dense_spectrum() {
        let o = op(50, 0.02, |t| 1.0 + t.cos());
        let ev = SymmetricEigen::new(o.dense_fd()).eigenvalues;
        for sigma in [-3.0, -1.0, 0.0, 0.7, 5.0] {
            let dense = ev.iter().filter(|&&v| v < sigma).count();
            assert_eq!(Sturm::count_below(&o, sigma), dense, "σ = {sigma}");
        }
    }

    #[test]
    fn spectral_symbol_is_exact_for_constant_rho() {
        let o = op(32, 0.1, |_| 0.0);
        let ev = SymmetricEigen::new(o.dense_spectral()).eigenvalues;
        let mut got: Vec<f64> = ev.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        // modes 0, ±1, ±2, ... on a 2π period: κk²
        let mut want: Vec<f64> = (-15i64..=16).map(|k| 0.1 * (k * k) as f64).collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn unknown_strategy_is_rejected() {
        assert!(EigenRegistry::default().create("lanczos").is_err());
    }
}
