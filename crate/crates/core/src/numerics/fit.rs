//! Least-squares line fits with confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl LinearFit {
    /// Two-sided confidence interval for the slope at `level` (e.g. 0.95).
    /// Degenerates to a point when the fit has no residual degrees of freedom.
    pub fn slope_interval(&self, level: f64) -> (f64, f64) {
        let half = self.t_quantile(level) * self.slope_stderr;
        (self.slope - half, self.slope + half)
    }

    fn t_quantile(&self, level: f64) -> f64 {
        if self.n <= 2 {
            return 0.0;
        }
        let dof = (self.n - 2) as f64;
        StudentsT::new(0.0, 1.0, dof)
            .map(|t| t.inverse_cdf(0.5 + 0.5 * level))
            .unwrap_or(f64::INFINITY)
    }
}

/// Ordinary least squares y = intercept + slope * x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "a line fit needs at least two points");
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let syy: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let s2 = sse / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        r_squared,
        n,
    }
}

/// Fit of ln y against ln x; the slope is the observed power-law exponent.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 - 0.75 * v).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope + 0.75).abs() < 1e-14);
        assert!((f.intercept - 2.5).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interval_covers_noisy_slope() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| 1.0 + 2.0 * v + if i % 2 == 0 { 0.3 } else { -0.3 })
            .collect();
        let f = linear_fit(&x, &y);
        let (lo, hi) = f.slope_interval(0.95);
        assert!(lo < 2.0 && 2.0 < hi);
        assert!(hi - lo < 0.1);
    }

    #[test]
    fn power_law_exponent() {
        let x = [1e-2, 1e-3, 1e-4];
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t * t).collect();
        assert!((log_log_fit(&x, &y).slope - 2.0).abs() < 1e-12);
    }
}
