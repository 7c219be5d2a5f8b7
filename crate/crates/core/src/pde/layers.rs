//! Zero-level extraction and comparison with the predicted depths.

use serde::Serialize;

use crate::placement::Prediction;

use super::grid::CollarField;

/// Crossings whose slope |u_s| falls below this are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Sign changes along one normal line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossings {
    pub depths: Vec<f64>,
    /// Two crossings closer than two grid steps.
    pub unresolved: bool,
}

/// Measured layer depths (stretched units s = t/ε) on each normal line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerTrace {
    pub eps: f64,
    pub theta: Vec<f64>,
    /// `depths[line][j]`, sorted.
    pub depths: Vec<Vec<f64>>,
    /// Lines with an unresolved pair of crossings.
    pub unresolved: Vec<usize>,
}

impl LayerTrace {
    /// Common layer count, or `None` when lines disagree.
    pub fn count(&self) -> Option<usize> {
        let first = self.depths.first()?.len();
        self.depths.iter().all(|d| d.len() == first).then_some(first)
    }

    /// Most frequent count (used for branch diagnostics).
    pub fn modal_count(&self) -> usize {
        let mut counts = std::collections::BTreeMap::new();
        for d in &self.depths {
            *counts.entry(d.len()).or_insert(0usize) += 1;
        }
        counts.into_iter().max_by_key(|&(_, c)| c).map_or(0, |(n, _)| n)
    }

    /// Depth of layer j (1-based) along θ.
    pub fn layer(&self, j: usize) -> Vec<f64> {
        self.depths.iter().map(|d| d[j - 1]).collect()
    }

    /// Physical depth t = εs.
    pub fn physical(&self, line: usize, j: usize) -> f64 {
        self.eps * self.depths[line][j - 1]
    }

    /// max_θ − min_θ of layer j.
    pub fn spread(&self, j: usize) -> f64 {
        let d = self.layer(j);
        d.iter().copied().fold(f64::NEG_INFINITY, f64::max) - d.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self, predicted: Option<&[Prediction]>) -> String {
        let mut out = String::from("theta,j,depth_measured,depth_predicted,delta\n");
        for (m, d) in self.depths.iter().enumerate() {
            for (j, s) in d.iter().enumerate() {
                let p = predicted.and_then(|p| p.get(m)).and_then(|p| p.f.get(j)).copied();
                match p {
                    Some(p) => out.push_str(&format!("{:.10e},{},{s:.12e},{p:.12e},{:.12e}\n", self.theta[m], j + 1, s - p)),
                    None => out.push_str(&format!("{:.10e},{},{s:.12e},,\n", self.theta[m], j + 1)),
                }
            }
        }
        out
    }
}

fn cubic_through(xs: &[f64; 4], ys: &[f64; 4], x: f64) -> f64 {
    let mut v = 0.0;
    for a in 0..4 {
        let mut w = ys[a];
        for b in 0..4 {
            if a != b {
                w *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        v += w;
    }
    v
}

/// Sign changes of `u` on the nodes `s`: linear interpolation, then one secant
/// step on the local cubic interpolant.
pub fn extract_crossings(s: &[f64], u: &[f64], noise_floor: f64) -> Crossings {
    assert_eq!(s.len(), u.len());
    let n = s.len();
    let mut depths = Vec::new();
    let mut min_step = f64::INFINITY;
    for i in 0..n.saturating_sub(1) {
        let (a, b) = (u[i], u[i + 1]);
        if a == 0.0 && i > 0 {
            continue;
        }
        if a * b > 0.0 || (a == 0.0 && b == 0.0) {
            continue;
        }
        let h = s[i + 1] - s[i];
        min_step = min_step.min(h);
        if ((b - a) / h).abs() < noise_floor {
            continue;
        }
        let x0 = s[i] - a * h / (b - a);
        let lo = i.saturating_sub(1).min(n.saturating_sub(4));
        let root = if n >= 4 {
            let xs = [s[lo], s[lo + 1], s[lo + 2], s[lo + 3]];
            let ys = [u[lo], u[lo + 1], u[lo + 2], u[lo + 3]];
            let p0 = cubic_through(&xs, &ys, x0);
            // secant between the linear root and the bracket end of opposite sign
            let (xe, pe) = if p0 * a < 0.0 { (s[i], a) } else { (s[i + 1], b) };
            if pe == p0 {
                x0
            } else {
                let x1 = x0 - p0 * (x0 - xe) / (p0 - pe);
                if x1 >= s[i] && x1 <= s[i + 1] {
                    x1
                } else {
                    x0
                }
            }
        } else {
            x0
        };
        depths.push(root);
    }
    let unresolved = depths.windows(2).any(|w| w[1] - w[0] < 2.0 * min_step);
    Crossings { depths, unresolved }
}

/// Crossings on every line of a strip field; the Dirichlet value `far` is
/// appended at s_max.
pub fn extract_layers(u: &CollarField, eps: f64, far: f64) -> LayerTrace {
    let g = u.grid;
    let s: Vec<f64> = (0..=g.ns).map(|i| g.s(i)).collect();
    let mut depths = Vec::with_capacity(g.nz);
    let mut unresolved = Vec::new();
    for m in 0..g.nz {
        let mut line = u.line(m).to_vec();
        line.push(far);
        let c = extract_crossings(&s, &line, NOISE_FLOOR);
        if c.unresolved {
            unresolved.push(m);
        }
        depths.push(c.depths);
    }
    LayerTrace {
        eps,
        theta: (0..g.nz).map(|m| eps * g.z(m)).collect(),
        depths,
        unresolved,
    }
}

/// Measured against predicted depth (or spacing) for one layer on one line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerDelta {
    pub line: usize,
    pub theta: f64,
    pub j: usize,
    pub measured: f64,
    pub predicted: f64,
    pub delta: f64,
    pub relative: f64,
    pub measured_spacing: Option<f64>,
    pub predicted_spacing: Option<f64>,
}

/// Per line and layer: measured minus predicted f_j, and the spacing f_j − f_{j−1}
/// for j ≥ 2. `predicted` holds one prediction per line (a single entry is reused).
pub fn compare_to_theory(trace: &LayerTrace, predicted: &[Prediction]) -> Vec<LayerDelta> {
    let mut out = Vec::new();
    for (m, d) in trace.depths.iter().enumerate() {
        let p = &predicted[m.min(predicted.len() - 1)];
        for j in 0..d.len().min(p.f.len()) {
            let (measured, pred) = (d[j], p.f[j]);
            let (ms, ps) = if j > 0 {
                (Some(d[j] - d[j - 1]), Some(p.f[j] - p.f[j - 1]))
            } else {
                (None, None)
            };
            out.push(LayerDelta {
                line: m,
                theta: trace.theta[m],
                j: j + 1,
                measured,
                predicted: pred,
                delta: measured - pred,
                relative: (measured - pred).abs() / pred.abs(),
                measured_spacing: ms,
                predicted_spacing: ps,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::h;

    #[test]
    fn single_profile_crossing() {
        let hs = 0.1;
        let s: Vec<f64> = (0..200).map(|i| i as f64 * hs).collect();
        let u: Vec<f64> = s.iter().map(|&s| h(1.3 * (s - 5.0137))).collect();
        let c = extract_crossings(&s, &u, NOISE_FLOOR);
        assert_eq!(c.depths.len(), 1);
        assert!((c.depths[0] - 5.0137).abs() < hs * hs);
        assert!(!c.unresolved);
    }

    #[test]
    fn close_pair_is_flagged() {
        let s: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = s.iter().map(|&s| (s - 4.02) * (s - 4.17)).collect();
        let c = extract_crossings(&s, &u, NOISE_FLOOR);
        assert_eq!(c.depths.len(), 2);
        assert!(c.unresolved);
    }

    #[test]
    fn flat_zero_region_is_noise() {
        let s: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = s.iter().map(|&s| 1e-9 * (s - 2.05)).collect();
        assert!(extract_crossings(&s, &u, NOISE_FLOOR).depths.is_empty());
    }

    #[test]
    fn deltas_are_plumbed() {
        let trace = LayerTrace {
            eps: 0.01,
            theta: vec![0.0],
            depths: vec![vec![2.0, 6.0]],
            unresolved: vec![],
        };
        let p = Prediction {
            f: vec![2.1, 5.5],
            spacings: vec![3.4],
        };
        let d = compare_to_theory(&trace, &[p]);
        assert!((d[0].delta + 0.1).abs() < 1e-15);
        assert!((d[1].measured_spacing.unwrap() - 4.0).abs() < 1e-15);
        assert!((d[1].predicted_spacing.unwrap() - 3.4).abs() < 1e-15);
    }
}
