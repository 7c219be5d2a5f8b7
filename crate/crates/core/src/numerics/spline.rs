//! Periodic cubic interpolation on a uniform grid.

use super::tridiag::solve_cyclic_tridiagonal;

/// C² periodic cubic spline through `values[i]` at `x0 + i * h`, period `n * h`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(x0: f64, period: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 3, "periodic spline needs at least three samples");
        let h = period / n as f64;
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let prev = values[(i + n - 1) % n];
                let next = values[(i + 1) % n];
                6.0 * (next - 2.0 * values[i] + prev) / (h * h)
            })
            .collect();
        let second = solve_cyclic_tridiagonal(&vec![1.0; n], &vec![4.0; n], &vec![1.0; n], &rhs);
        Self {
            x0,
            h,
            values,
            second,
        }
    }

    pub fn period(&self) -> f64 {
        self.h * self.values.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    fn locate(&self, x: f64) -> (usize, usize, f64) {
        let n = self.values.len();
        let p = self.period();
        let mut u = (x - self.x0).rem_euclid(p) / self.h;
        if u >= n as f64 {
            u -= n as f64;
        }
        let i = (u.floor() as usize).min(n - 1);
        let t = u - i as f64;
        (i, (i + 1) % n, t)
    }

    /// Returns (value, first derivative, second derivative) at `x`.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let (i, j, t) = self.locate(x);
        let h = self.h;
        let a = 1.0 - t;
        let b = t;
        let (yi, yj) = (self.values[i], self.values[j]);
        let (mi, mj) = (self.second[i], self.second[j]);
        let v = a * yi + b * yj + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
        let d = (yj - yi) / h + ((1.0 - 3.0 * a * a) * mi + (3.0 * b * b - 1.0) * mj) * h / 6.0;
        let dd = a * mi + b * mj;
        (v, d, dd)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_all(x).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reproduces_trigonometric_data() {
        let n = 64;
        let p = 2.0 * PI;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * p / n as f64).sin()).collect();
        let s = PeriodicSpline::new(0.0, p, vals);
        for k in 0..50 {
            let x = -3.0 + 0.37 * k as f64;
            let (v, d, dd) = s.eval_all(x);
            assert!((v - x.sin()).abs() < 2e-6);
            assert!((d - x.cos()).abs() < 2e-4);
            assert!((dd + x.sin()).abs() < 1e-2);
        }
    }

    #[test]
    fn interpolates_nodes_exactly() {
        let vals = vec![1.0, 3.0, -2.0, 0.5, 4.0];
        let s = PeriodicSpline::new(1.0, 5.0, vals.clone());
        for (i, v) in vals.iter().enumerate() {
            assert!((s.eval(1.0 + i as f64) - v).abs() < 1e-12);
            assert!((s.eval(6.0 + i as f64) - v).abs() < 1e-12);
        }
    }
}
