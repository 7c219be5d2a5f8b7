//! Tridiagonal and cyclic tridiagonal solvers.
//!
//! Row `i` reads `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1] = rhs[i]`.
//! For the plain solver `lower[0]` and `upper[n-1]` are ignored; for the cyclic
//! solver they couple the first and last unknowns.

/// Thomas algorithm. No pivoting; callers supply diagonally dominant or definite systems.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// Reusable Thomas factorization for repeated solves with one matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    lower: Vec<f64>,
    inv_pivot: Vec<f64>,
    c: Vec<f64>,
}

impl TridiagonalFactor {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n);
        let mut inv_pivot = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            let beta = if i == 0 { diag[0] } else { diag[i] - lower[i] * c[i - 1] };
            inv_pivot[i] = 1.0 / beta;
            c[i] = if i + 1 < n { upper[i] * inv_pivot[i] } else { 0.0 };
        }
        Self {
            lower: lower.to_vec(),
            inv_pivot,
            c,
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.c.len();
        if n == 0 {
            return;
        }
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.c[i] * x[i + 1];
        }
    }
}

/// Periodic tridiagonal solve via Sherman-Morrison.
pub fn solve_cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    match n {
        0 => return Vec::new(),
        1 => return vec![rhs[0] / (diag[0] + lower[0] + upper[0])],
        2 => {
            let a = diag[0];
            let b = upper[0] + lower[0];
            let c = lower[1] + upper[1];
            let d = diag[1];
            let det = a * d - b * c;
            return vec![(rhs[0] * d - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det];
        }
        _ => {}
    }
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut dd = diag.to_vec();
    dd[0] -= gamma;
    dd[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &dd, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &dd, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64], cyclic: bool) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += lower[i] * x[i - 1];
                } else if cyclic {
                    v += lower[0] * x[n - 1];
                }
                if i + 1 < n {
                    v += upper[i] * x[i + 1];
                } else if cyclic {
                    v += upper[n - 1] * x[0];
                }
                v
            })
            .collect()
    }

    #[test]
    fn thomas_round_trip() {
        let n = 12;
        let lower: Vec<f64> = (0..n).map(|i| 0.3 + 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.7 + 0.02 * i as f64).collect();
        let diag = vec![3.0; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let b = apply(&lower, &diag, &upper, &x, false);
        let y = solve_tridiagonal(&lower, &diag, &upper, &b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn factor_matches_direct_solve() {
        let n = 9;
        let lower: Vec<f64> = (0..n).map(|i| 0.2 * i as f64).collect();
        let upper = vec![-1.0; n];
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + 0.1 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let f = TridiagonalFactor::new(&lower, &diag, &upper);
        let mut x = rhs.clone();
        f.solve_in_place(&mut x);
        let y = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cyclic_round_trip() {
        for n in [2usize, 3, 7, 40] {
            let lower: Vec<f64> = (0..n).map(|i| -1.0 + 0.05 * i as f64).collect();
            let upper: Vec<f64> = (0..n).map(|i| -1.0 - 0.03 * i as f64).collect();
            let diag: Vec<f64> = (0..n).map(|i| 4.5 + (i as f64).sin()).collect();
            let x: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).sin() + 0.1).collect();
            let b = apply(&lower, &diag, &upper, &x, true);
            let y = solve_cyclic_tridiagonal(&lower, &diag, &upper, &b);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-12, "n={n}");
            }
        }
    }
}
