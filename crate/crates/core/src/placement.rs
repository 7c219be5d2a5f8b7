//! Layer placement: logarithmic leading terms ḟ_j, O(1) offsets f̄_j, interaction
//! coefficients, and the predicted layer depths.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundaryTraces;
use crate::profile::{weighted_gammas, CutoffFamily, ProfileError, GAMMA1};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlacementError {
    #[error("need at least one layer")]
    NoLayers,
    #[error("ε = {eps} must lie in (0, 1/N) for N = {n}")]
    EpsOutOfRange { eps: f64, n: usize },
    #[error("generalized mean curvature 𝓗 = {value} ≤ 0 at θ = {theta}")]
    NonPositiveMeanCurvature { theta: f64, value: f64 },
    #[error("offset Newton stagnated at θ = {theta}; residual trace {trace:?}")]
    Stagnation { theta: f64, trace: Vec<f64> },
    #[error(transparent)]
    Cutoff(#[from] ProfileError),
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn check(n: usize, eps: f64) -> Result<(), PlacementError> {
    if n == 0 {
        return Err(PlacementError::NoLayers);
    }
    if !(eps > 0.0 && eps * (n as f64) < 1.0) {
        return Err(PlacementError::EpsOutOfRange { eps, n });
    }
    Ok(())
}

/// ḟ_j (j = 1..N).
pub fn dot_f(n: usize, eps: f64, beta: f64, j: usize) -> Result<f64, PlacementError> {
    check(n, eps)?;
    assert!((1..=n).contains(&j));
    let f1 = (1.0 / (n as f64 * eps)).ln() / (2.0 * SQRT_2 * beta);
    if j == 1 {
        return Ok(f1);
    }
    let log_ratio = ln_factorial(n - j) - ln_factorial(n - 1) - (j as f64 - 1.0) * eps.ln();
    Ok(f1 + log_ratio / (SQRT_2 * beta))
}

/// Formal ladder e^{−√2β(f_j − f_{j−1})} ≈ (N + 1 − j)·ε·(√2/(12β))·𝓗, j = 1..N
/// (the j = 1 entry is the doubled gap 2f₁).
pub fn formal_spacings(n: usize, eps: f64, beta: f64, mean_curvature: f64) -> Result<Vec<f64>, PlacementError> {
    check(n, eps)?;
    if !(mean_curvature > 0.0) {
        return Err(PlacementError::NonPositiveMeanCurvature {
            theta: f64::NAN,
            value: mean_curvature,
        });
    }
    Ok((1..=n)
        .map(|j| (n + 1 - j) as f64 * eps * SQRT_2 / (12.0 * beta) * mean_curvature)
        .collect())
}

/// Weights γ_{1,j}, γ_{2,j} entering the offset system at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaWeights {
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

impl GammaWeights {
    pub fn unweighted(n: usize) -> Self {
        Self {
            g1: vec![GAMMA1; n],
            g2: vec![GAMMA1; n],
        }
    }
}

/// Solution of the offset system at one node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarF {
    /// f̄_1..f̄_N.
    pub bar_f: Vec<f64>,
    /// u_j = e^{−√2β(f̄_j − f̄_{j−1})}.
    pub ladder: Vec<f64>,
    /// ∞-norm residual of the offset equations after each Newton step.
    pub residual_trace: Vec<f64>,
}

/// Residual of the offset equations in f̄ form:
/// 6√2β²[(N−j+1)γ_{1,j}e^{−√2β(f̄_j−f̄_{j−1})} − (N−j)γ_{2,j}e^{−√2β(f̄_{j+1}−f̄_j)}] − (2√2/3)𝓗.
pub fn barf_residual(bar_f: &[f64], beta: f64, mean_curvature: f64, w: &GammaWeights) -> Vec<f64> {
    let n = bar_f.len();
    let gap = |j: usize| {
        // gap between f̄_j and f̄_{j−1}, with f̄_0 = −f̄_1 (1-based j)
        if j == 1 {
            2.0 * bar_f[0]
        } else {
            bar_f[j - 1] - bar_f[j - 2]
        }
    };
    (1..=n)
        .map(|j| {
            let lower = (n - j + 1) as f64 * w.g1[j - 1] * (-SQRT_2 * beta * gap(j)).exp();
            let upper = if j < n {
                (n - j) as f64 * w.g2[j - 1] * (-SQRT_2 * beta * gap(j + 1)).exp()
            } else {
                0.0
            };
            6.0 * SQRT_2 * beta * beta * (lower - upper) - 2.0 * SQRT_2 / 3.0 * mean_curvature
        })
        .collect()
}

/// Closed-form leading offsets f̄_j ≈ −(2j − 1) ln(𝓗/(9γ₁β²)) / (2√2β).
pub fn barf_closed_form(n: usize, beta: f64, mean_curvature: f64) -> Vec<f64> {
    let c = mean_curvature / (9.0 * GAMMA1 * beta * beta);
    (1..=n)
        .map(|j| -((2 * j - 1) as f64) * c.ln() / (2.0 * SQRT_2 * beta))
        .collect()
}

/// Newton on the offset system in the ladder variables u_j, seeded by the closed forms.
pub fn solve_barf(n: usize, beta: f64, mean_curvature: f64, w: &GammaWeights, theta: f64) -> Result<BarF, PlacementError> {
    if n == 0 {
        return Err(PlacementError::NoLayers);
    }
    if !(mean_curvature > 0.0) {
        return Err(PlacementError::NonPositiveMeanCurvature {
            theta,
            value: mean_curvature,
        });
    }
    let scale = 6.0 * SQRT_2 * beta * beta;
    let target = 2.0 * SQRT_2 / 3.0 * mean_curvature;
    let guess = barf_closed_form(n, beta, mean_curvature);
    let mut u = ladder_from(&guess, beta);
    // the system is linear in u with an upper bidiagonal Jacobian
    let residual_u = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let next = if i + 1 < n { (n - i - 1) as f64 * w.g2[i] * u[i + 1] } else { 0.0 };
                scale * ((n - i) as f64 * w.g1[i] * u[i] - next) - target
            })
            .collect()
    };
    let mut trace = Vec::new();
    let mut r = residual_u(&u);
    trace.push(norm_inf(&r));
    for _ in 0..20 {
        if norm_inf(&r) < 1e-14 * target.max(1.0) {
            break;
        }
        let mut du = vec![0.0; n];
        for i in (0..n).rev() {
            let diag = scale * (n - i) as f64 * w.g1[i];
            let off = if i + 1 < n { scale * (n - i - 1) as f64 * w.g2[i] * du[i + 1] } else { 0.0 };
            du[i] = (-r[i] + off) / diag;
        }
        u.iter_mut().zip(&du).for_each(|(a, d)| *a += d);
        r = residual_u(&u);
        trace.push(norm_inf(&r));
    }
    if u.iter().any(|&v| !(v > 0.0)) || norm_inf(&r) > 1e-12 {
        return Err(PlacementError::Stagnation { theta, trace });
    }
    let mut bar_f = Vec::with_capacity(n);
    for (j, &uj) in u.iter().enumerate() {
        let v = if j == 0 {
            -uj.ln() / (2.0 * SQRT_2 * beta)
        } else {
            bar_f[j - 1] - uj.ln() / (SQRT_2 * beta)
        };
        bar_f.push(v);
    }
    trace.push(norm_inf(&barf_residual(&bar_f, beta, mean_curvature, w)));
    Ok(BarF {
        bar_f,
        ladder: u,
        residual_trace: trace,
    })
}

fn ladder_from(bar_f: &[f64], beta: f64) -> Vec<f64> {
    (0..bar_f.len())
        .map(|j| {
            let gap = if j == 0 { 2.0 * bar_f[0] } else { bar_f[j] - bar_f[j - 1] };
            (-SQRT_2 * beta * gap).exp()
        })
        .collect()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// 𝐝_j, 𝐤_j (j = 1..N+1) and 𝔞_{n−1} (n = 1..N) at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionCoeffs {
    pub d: Vec<f64>,
    pub k: Vec<f64>,
    pub a: Vec<f64>,
}

/// Interaction coefficients from solved offsets (f̌ ≡ 0, so 𝐤 = 𝐝).
pub fn interaction_coeffs(bar_f: &[f64], beta: f64) -> InteractionCoeffs {
    let n = bar_f.len();
    let u = ladder_from(bar_f, beta);
    let mut d: Vec<f64> = (0..n).map(|j| (n - j) as f64 * u[j]).collect();
    d.push(0.0);
    let k = d.clone();
    let a = (0..n).map(|j| 12.0 * beta * beta * GAMMA1 * k[j]).collect();
    InteractionCoeffs { d, k, a }
}

/// Predicted depth f₁ and spacings f_j − f_{j−1} (j = 2..N) at one node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub f: Vec<f64>,
    pub spacings: Vec<f64>,
}

pub fn predicted_positions(n: usize, eps: f64, beta: f64, mean_curvature: f64) -> Result<Prediction, PlacementError> {
    check(n, eps)?;
    if !(mean_curvature > 0.0) {
        return Err(PlacementError::NonPositiveMeanCurvature {
            theta: f64::NAN,
            value: mean_curvature,
        });
    }
    let tail = -mean_curvature.ln() + (9.0 * GAMMA1 * beta * beta).ln();
    let f1 = ((1.0 / (n as f64 * eps)).ln() + tail) / (2.0 * SQRT_2 * beta);
    let spacings: Vec<f64> = (2..=n)
        .map(|j| ((1.0 / ((n + 1 - j) as f64 * eps)).ln() + tail) / (SQRT_2 * beta))
        .collect();
    let mut f = vec![f1];
    for s in &spacings {
        f.push(f.last().unwrap() + s);
    }
    Ok(Prediction { f, spacings })
}

/// Largest ε for which the predicted depths stay positive and ordered at this node.
pub fn ordering_threshold(n: usize, beta: f64, mean_curvature: f64) -> f64 {
    (9.0 * GAMMA1 * beta * beta / (n as f64 * mean_curvature)).min(1.0 / n as f64)
}

/// Per-θ layer offsets, stored `[j][node]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerVector {
    pub n: usize,
    pub theta: Vec<f64>,
    pub dot: Vec<Vec<f64>>,
    pub bar: Vec<Vec<f64>>,
    pub tilde: Vec<Vec<f64>>,
}

impl LayerVector {
    /// f_j(θ_i) = ḟ + f̄ + f̃ for 1-based j.
    pub fn total(&self, j: usize, i: usize) -> f64 {
        self.dot[j - 1][i] + self.bar[j - 1][i] + self.tilde[j - 1][i]
    }

    /// All depths at node i.
    pub fn at(&self, i: usize) -> Vec<f64> {
        (1..=self.n).map(|j| self.total(j, i)).collect()
    }

    pub fn nodes(&self) -> usize {
        self.theta.len()
    }

    pub fn max_depth(&self) -> f64 {
        (0..self.nodes()).map(|i| self.total(self.n, i)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which γ-weights feed the offset system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WeightMode {
    #[default]
    Unweighted,
    /// Cutoff-weighted values from the partition of unity with transition half-width δ̃.
    Cutoff { delta_tilde: f64 },
}

/// Full placement output over the θ grid.
#[derive(Debug, Clone, Serialize)]
pub struct Placement {
    pub n: usize,
    pub eps: f64,
    pub mean_curvature: Vec<f64>,
    pub beta: Vec<f64>,
    pub layers: LayerVector,
    pub coeffs: Vec<InteractionCoeffs>,
    pub predicted: Vec<Prediction>,
    /// Max |predicted − (ḟ + f̄)| over all nodes and layers.
    pub route_gap: f64,
    /// Max offset residual over nodes.
    pub barf_residual: f64,
    /// Smallest per-node ordering threshold ε*.
    pub eps_star: f64,
    /// Max |γ_{i,j} − γ₁| when cutoff weights are used.
    pub weight_deviation: f64,
}

pub fn place(traces: &BoundaryTraces, n: usize, eps: f64, mode: WeightMode) -> Result<Placement, PlacementError> {
    check(n, eps)?;
    if let Some(i) = traces.mean_curvature.iter().position(|&h| !(h > 0.0)) {
        return Err(PlacementError::NonPositiveMeanCurvature {
            theta: traces.theta[i],
            value: traces.mean_curvature[i],
        });
    }
    struct Node {
        dot: Vec<f64>,
        bar: BarF,
        pred: Prediction,
        dev: f64,
    }
    let nodes: Vec<Node> = (0..traces.len())
        .into_par_iter()
        .map(|i| {
            let (beta, hm, theta) = (traces.beta[i], traces.mean_curvature[i], traces.theta[i]);
            let dot = (1..=n).map(|j| dot_f(n, eps, beta, j)).collect::<Result<Vec<_>, _>>()?;
            let mut w = GammaWeights::unweighted(n);
            let mut bar = solve_barf(n, beta, hm, &w, theta)?;
            let mut dev: f64 = 0.0;
            if let WeightMode::Cutoff { delta_tilde } = mode {
                for _ in 0..4 {
                    let f: Vec<f64> = (0..n).map(|j| dot[j] + bar.bar_f[j]).collect();
                    let cut = CutoffFamily::new(&f, beta, delta_tilde)?;
                    let mut g1 = Vec::with_capacity(n);
                    let mut g2 = Vec::with_capacity(n);
                    for j in 1..=n {
                        let (_, a, b) = weighted_gammas(&cut, j, f[j - 1], beta);
                        g1.push(a);
                        g2.push(b);
                    }
                    dev = g1
                        .iter()
                        .chain(&g2[..n - 1])
                        .map(|g| (g - GAMMA1).abs())
                        .fold(0.0, f64::max);
                    w = GammaWeights { g1, g2 };
                    bar = solve_barf(n, beta, hm, &w, theta)?;
                }
            }
            let pred = predicted_positions(n, eps, beta, hm)?;
            Ok(Node { dot, bar, pred, dev })
        })
        .collect::<Result<_, PlacementError>>()?;
    let m = traces.len();
    let mut layers = LayerVector {
        n,
        theta: traces.theta.clone(),
        dot: vec![vec![0.0; m]; n],
        bar: vec![vec![0.0; m]; n],
        tilde: vec![vec![0.0; m]; n],
    };
    let mut route_gap: f64 = 0.0;
    let mut barf_residual: f64 = 0.0;
    let mut weight_deviation: f64 = 0.0;
    for (i, node) in nodes.iter().enumerate() {
        for j in 0..n {
            layers.dot[j][i] = node.dot[j];
            layers.bar[j][i] = node.bar.bar_f[j];
            if matches!(mode, WeightMode::Unweighted) {
                route_gap = route_gap.max((node.pred.f[j] - node.dot[j] - node.bar.bar_f[j]).abs());
            }
        }
        barf_residual = barf_residual.max(*node.bar.residual_trace.last().unwrap());
        weight_deviation = weight_deviation.max(node.dev);
    }
    let coeffs = (0..m)
        .map(|i| interaction_coeffs(&nodes[i].bar.bar_f, traces.beta[i]))
        .collect();
    let eps_star = (0..m)
        .map(|i| ordering_threshold(n, traces.beta[i], traces.mean_curvature[i]))
        .fold(f64::INFINITY, f64::min);
    Ok(Placement {
        n,
        eps,
        mean_curvature: traces.mean_curvature.clone(),
        beta: traces.beta.clone(),
        layers,
        coeffs,
        predicted: nodes.into_iter().map(|nd| nd.pred).collect(),
        route_gap,
        barf_residual,
        eps_star,
        weight_deviation,
    })
}

impl Placement {
    /// `placement.csv` body: θ, 𝓗, ḟ_j…, f̄_j…, predicted f_j…, spacings.
    pub fn to_csv(&self) -> String {
        let n = self.n;
        let mut out = String::from("theta,mean_curvature");
        for prefix in ["fdot", "fbar", "f"] {
            for j in 1..=n {
                out.push_str(&format!(",{prefix}_{j}"));
            }
        }
        for j in 2..=n {
            out.push_str(&format!(",spacing_{j}"));
        }
        out.push('\n');
        for i in 0..self.layers.nodes() {
            out.push_str(&format!("{:.12e},{:.12e}", self.layers.theta[i], self.mean_curvature[i]));
            for j in 0..n {
                out.push_str(&format!(",{:.12e}", self.layers.dot[j][i]));
            }
            for j in 0..n {
                out.push_str(&format!(",{:.12e}", self.layers.bar[j][i]));
            }
            for v in &self.predicted[i].f {
                out.push_str(&format!(",{v:.12e}"));
            }
            for v in &self.predicted[i].spacings {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_f_examples() {
        let f1 = dot_f(1, 0.01, 1.0, 1).unwrap();
        assert!((f1 - 100f64.ln() / (2.0 * SQRT_2)).abs() < 1e-15);
        let d = dot_f(2, 0.01, 1.0, 2).unwrap() - dot_f(2, 0.01, 1.0, 1).unwrap();
        assert!((d - 100f64.ln() / SQRT_2).abs() < 1e-14);
        for j in 1..=3 {
            let a = dot_f(3, 0.01, 1.0, j).unwrap();
            let b = dot_f(3, 0.01, 2.0, j).unwrap();
            assert!((b - a / 2.0).abs() < 1e-14);
        }
        assert!(dot_f(2, 0.5, 1.0, 1).is_err());
    }

    #[test]
    fn ladder_examples() {
        let l = formal_spacings(1, 0.01, 1.0, 1.0).unwrap();
        assert!((l[0] - 0.01 * SQRT_2 / 12.0).abs() < 1e-18);
        let l = formal_spacings(4, 0.01, 1.3, 0.7).unwrap();
        for j in 0..3 {
            let ratio = l[j] / l[j + 1];
            let expect = (4 - j) as f64 / (3 - j) as f64;
            assert!((ratio - expect).abs() < 1e-14);
        }
        assert!(formal_spacings(2, 0.01, 1.0, -0.1).is_err());
    }

    #[test]
    fn single_layer_offsets_close() {
        let b = solve_barf(1, 1.0, 1.0, &GammaWeights::unweighted(1), 0.0).unwrap();
        let exact = (9.0 * GAMMA1).ln() / (2.0 * SQRT_2);
        assert!((b.bar_f[0] - exact).abs() < 1e-12);
        assert!((b.bar_f[0] - 1.00108).abs() < 1e-5);
        let c = interaction_coeffs(&b.bar_f, 1.0);
        assert!((c.d[0] - 1.0 / (9.0 * GAMMA1)).abs() < 1e-14);
        assert!((c.a[0] - 4.0 / 3.0).abs() < 1e-13);
        assert_eq!(c.d[1], 0.0);
    }

    #[test]
    fn prediction_routes_agree() {
        for n in 1..=4 {
            for (beta, hm) in [(1.0, 1.0), (1.4, 0.3), (0.8, 2.5)] {
                let eps = 0.003;
                let p = predicted_positions(n, eps, beta, hm).unwrap();
                let b = solve_barf(n, beta, hm, &GammaWeights::unweighted(n), 0.0).unwrap();
                for j in 1..=n {
                    let route = dot_f(n, eps, beta, j).unwrap() + b.bar_f[j - 1];
                    assert!((route - p.f[j - 1]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn weighted_offsets_need_one_newton_step() {
        let w = GammaWeights {
            g1: vec![GAMMA1 * 1.01, GAMMA1 * 0.99, GAMMA1],
            g2: vec![GAMMA1 * 0.98, GAMMA1 * 1.02, GAMMA1],
        };
        let b = solve_barf(3, 1.2, 0.8, &w, 0.0).unwrap();
        assert!(b.residual_trace.len() <= 4);
        assert!(*b.residual_trace.last().unwrap() < 1e-12);
    }
}
