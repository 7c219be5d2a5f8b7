//! Spectral-gap scan over ε for the reduced periodic operators.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::{EigenStrategy, TodaError, TodaSystem};

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceScan {
    pub eps: Vec<f64>,
    pub gap: Vec<f64>,
    pub resonant: Vec<bool>,
    /// Indices of interior local minima of the gap curve.
    pub minima: Vec<usize>,
    pub threshold: f64,
}

impl ResonanceScan {
    /// Grid points with gap ≥ threshold·ε.
    pub fn admissible(&self) -> Vec<f64> {
        self.eps
            .iter()
            .zip(&self.resonant)
            .filter(|(_, r)| !**r)
            .map(|(e, _)| *e)
            .collect()
    }

    /// `resonance.csv` body; `analytic` supplies the nearest ε_res column.
    pub fn to_csv(&self, analytic: &[f64]) -> String {
        let mut out = String::from("eps,gap,resonant,nearest_eps_res\n");
        for i in 0..self.eps.len() {
            let e = self.eps[i];
            let near = analytic
                .iter()
                .copied()
                .min_by(|a, b| (a / e).ln().abs().total_cmp(&(b / e).ln().abs()));
            let near = near.map_or(String::new(), |v| format!("{v:.10e}"));
            out.push_str(&format!("{e:.10e},{:.10e},{},{near}\n", self.gap[i], u8::from(self.resonant[i])));
        }
        out
    }
}

/// Gap min_n min|spec(−εγ₀D² − ρ_n)| for every ε in `eps_grid`. The coupling
/// tables of `base` do not depend on ε (the offsets f̄ are ε-free), so only the
/// diffusion coefficient changes along the scan.
pub fn resonance_scan(
    base: &TodaSystem,
    eps_grid: &[f64],
    strategy: &dyn EigenStrategy,
    threshold: f64,
) -> Result<ResonanceScan, TodaError> {
    let rho = base.rho_table();
    let gap: Vec<f64> = eps_grid
        .par_iter()
        .map(|&eps| {
            let mut sys = base.clone();
            sys.eps = eps;
            let mut g = f64::INFINITY;
            for r in &rho {
                g = g.min(strategy.min_abs_eigenvalue(&sys.mode_operator(r))?);
            }
            Ok(g)
        })
        .collect::<Result<_, TodaError>>()?;
    let resonant = eps_grid.iter().zip(&gap).map(|(e, g)| *g < threshold * e).collect();
    let minima = (1..gap.len().saturating_sub(1))
        .filter(|&i| gap[i] < gap[i - 1] && gap[i] < gap[i + 1])
        .collect();
    Ok(ResonanceScan {
        eps: eps_grid.to_vec(),
        gap,
        resonant,
        minima,
        threshold,
    })
}

/// ε_res(m) = ρℓ²/(4π²γ₀m²) for constant ρ, restricted to [lo, hi], as (m, ε).
pub fn analytic_resonances(rho: f64, length: f64, gamma0: f64, lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let at = |m: usize| rho * length * length / (4.0 * PI * PI * gamma0 * (m * m) as f64);
    let first = ((rho * length * length / (4.0 * PI * PI * gamma0 * hi)).sqrt().floor() as usize).max(1);
    (first..)
        .map(|m| (m, at(m)))
        .skip_while(|(_, e)| *e > hi)
        .take_while(|(_, e)| *e >= lo)
        .collect()
}

/// Agreement between scan minima and analytic resonances on a log grid with
/// cell width `cell` (in ln ε).
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceMatch {
    /// Largest log-distance from a scan minimum to the nearest ε_res, in cells.
    pub worst_minimum_offset: f64,
    /// Resolvable resonances (neighbours at least two cells away, inside the grid).
    pub resolvable: usize,
    /// Resolvable resonances without a scan minimum within one cell.
    pub missed: Vec<f64>,
}

impl ResonanceMatch {
    pub fn passed(&self) -> bool {
        self.worst_minimum_offset <= 1.0 && self.missed.is_empty()
    }
}

pub fn match_resonances(scan: &ResonanceScan, analytic: &[f64]) -> ResonanceMatch {
    let n = scan.eps.len();
    let cell = (scan.eps[n - 1] / scan.eps[0]).ln().abs() / (n - 1) as f64;
    let dist = |a: f64, b: f64| (a / b).ln().abs() / cell;
    let worst = scan
        .minima
        .iter()
        .map(|&i| analytic.iter().map(|&r| dist(scan.eps[i], r)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let (lo, hi) = (scan.eps[0].min(scan.eps[n - 1]), scan.eps[0].max(scan.eps[n - 1]));
    let mut resolvable = 0;
    let mut missed = Vec::new();
    for (k, &r) in analytic.iter().enumerate() {
        let inside = r > lo * (cell).exp() && r < hi * (-cell).exp();
        let isolated = analytic
            .iter()
            .enumerate()
            .filter(|&(q, _)| q != k)
            .all(|(_, &o)| dist(r, o) >= 2.0);
        if !(inside && isolated) {
            continue;
        }
        resolvable += 1;
        if !scan.minima.iter().any(|&i| dist(scan.eps[i], r) <= 1.0) {
            missed.push(r);
        }
    }
    ResonanceMatch {
        worst_minimum_offset: worst,
        resolvable,
        missed,
    }
}
