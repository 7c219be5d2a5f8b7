//! Restarted GMRES with right preconditioning.

use super::norm2;

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Relative residual target ||b - Ax|| / ||b||.
    pub rel_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            restart: 60,
            max_iter: 600,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` starting from `x`. `apply(v, out)` computes `A v`;
/// `precond(r, out)` applies an approximate inverse. The returned residual is the
/// true residual recomputed at each restart.
pub fn gmres<A, P>(apply: A, precond: P, b: &[f64], x: &mut [f64], opts: GmresOptions) -> GmresOutcome
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresOutcome {
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    let m = opts.restart.max(1);
    let mut work = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    loop {
        apply(x, &mut work);
        let r: Vec<f64> = b.iter().zip(&work).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= opts.rel_tol || total >= opts.max_iter {
            return GmresOutcome {
                iterations: total,
                rel_residual: rel,
                converged: rel <= opts.rel_tol,
            };
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            precond(&basis[k], &mut z);
            apply(&z, &mut work);
            let mut w = work.clone();
            for (i, v) in basis.iter().enumerate() {
                let hij: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                h[i][k] = hij;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= hij * b);
            }
            let wn = norm2(&w);
            h[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if wn > 0.0 {
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            if g[k + 1].abs() / bnorm <= opts.rel_tol || wn == 0.0 || total >= opts.max_iter {
                break;
            }
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            update.iter_mut().zip(v).for_each(|(u, b)| *u += yi * b);
        }
        precond(&update, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 50;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut s = 4.0 * v[i];
                if i > 0 {
                    s -= 1.5 * v[i - 1];
                }
                if i + 1 < n {
                    s -= 0.5 * v[i + 1];
                }
                out[i] = s;
            }
        };
        let jacobi = |r: &[f64], out: &mut [f64]| {
            out.iter_mut().zip(r).for_each(|(o, v)| *o = v / 4.0);
        };
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut b = vec![0.0; n];
        apply(&truth, &mut b);
        let mut x = vec![0.0; n];
        let out = gmres(
            apply,
            jacobi,
            &b,
            &mut x,
            GmresOptions {
                rel_tol: 1e-12,
                restart: 10,
                max_iter: 500,
            },
        );
        assert!(out.converged);
        for (a, b) in x.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
