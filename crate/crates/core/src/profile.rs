//! The heteroclinic profile H(x) = tanh(x/√2), its integral constants, the
//! explicit corrector ψ = ½xH_x, and the per-layer cutoff partition.

use std::f64::consts::SQRT_2;

use serde::Serialize;
use thiserror::Error;

use crate::numerics::GaussLegendre;

/// Default quadrature half-window.
pub const WINDOW: f64 = 25.0;
const PANEL: f64 = 0.5;
const GL_ORDER: usize = 12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProfileError {
    #[error("quadrature window [−{window}, {window}] too small; tail bound {tail_bound:.3e}")]
    WindowTooSmall { window: f64, tail_bound: f64 },
    #[error("cutoff supports overlap: layers {j} and {next} are {gap:.3} apart (need {required:.3})")]
    Separation {
        j: usize,
        next: usize,
        gap: f64,
        required: f64,
    },
}

/// γ₀ = ∫H_x² = 2√2/3.
pub const GAMMA0: f64 = 2.0 * SQRT_2 / 3.0;
/// γ₁ = ∫e^{−√2x}H_x² = 8/(3√2).
pub const GAMMA1: f64 = 8.0 / (3.0 * SQRT_2);
/// 2∫xH_xH_xx = −γ₀.
pub const IDENTITY1: f64 = -2.0 * SQRT_2 / 3.0;
/// 3∫(1 − H²)e^{−√2x}H_x = 8.
pub const IDENTITY2: f64 = 8.0;

#[inline]
pub fn h(x: f64) -> f64 {
    (x / SQRT_2).tanh()
}

#[inline]
pub fn hx(x: f64) -> f64 {
    let c = (x / SQRT_2).cosh();
    if c.is_infinite() {
        return 0.0;
    }
    1.0 / (SQRT_2 * c * c)
}

#[inline]
pub fn hxx(x: f64) -> f64 {
    -SQRT_2 * h(x) * hx(x)
}

#[inline]
pub fn hxxx(x: f64) -> f64 {
    let (v, d) = (h(x), hx(x));
    -SQRT_2 * (hxx(x) * v + d * d)
}

/// F(u) = u − u³.
#[inline]
pub fn nonlinearity(u: f64) -> f64 {
    u - u * u * u
}

/// Far-field form ±(1 − 2e^{−√2|x|}).
pub fn asymptotic_h(x: f64) -> f64 {
    x.signum() * (1.0 - 2.0 * (-SQRT_2 * x.abs()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeteroclinicEval {
    pub h: f64,
    pub hx: f64,
    /// H'' + (1 − H²)H.
    pub ode_residual: f64,
}

pub fn heteroclinic_eval(x: f64) -> HeteroclinicEval {
    let v = h(x);
    HeteroclinicEval {
        h: v,
        hx: hx(x),
        ode_residual: hxx(x) + (1.0 - v * v) * v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileIntegrals {
    pub gamma0: f64,
    pub gamma1: f64,
    pub identity1: f64,
    pub identity2: f64,
    /// Bound on the integrand mass outside the window.
    pub tail_bound: f64,
}

/// Composite Gauss-Legendre evaluation on [−window, window].
pub fn profile_integrals_on(window: f64) -> Result<ProfileIntegrals, ProfileError> {
    // slowest tail: e^{−√2x}H_x² ~ 8e^{−√2|x|} as x → −∞
    let tail_bound = 8.0 * (-SQRT_2 * window).exp() / SQRT_2;
    if window < 20.0 {
        return Err(ProfileError::WindowTooSmall { window, tail_bound });
    }
    let gl = GaussLegendre::new(GL_ORDER);
    let q = |f: &dyn Fn(f64) -> f64| gl.integrate_panels(-window, window, PANEL, f);
    Ok(ProfileIntegrals {
        gamma0: q(&|x| hx(x).powi(2)),
        gamma1: q(&|x| (-SQRT_2 * x).exp() * hx(x).powi(2)),
        identity1: 2.0 * q(&|x| x * hx(x) * hxx(x)),
        identity2: 3.0 * q(&|x| (1.0 - h(x).powi(2)) * (-SQRT_2 * x).exp() * hx(x)),
        tail_bound,
    })
}

pub fn profile_integrals() -> ProfileIntegrals {
    profile_integrals_on(WINDOW).expect("default window is admissible")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiEval {
    pub psi: f64,
    pub psi_x: f64,
    pub psi_xx: f64,
    /// ψ'' + (1 − 3H²)ψ + (H − H³).
    pub corrector_residual: f64,
}

/// ψ = ½xH_x, the odd decaying solution of ψ'' + (1 − 3H²)ψ = −(H − H³).
pub fn psi_eval(x: f64) -> PsiEval {
    let (v, d, dd, ddd) = (h(x), hx(x), hxx(x), hxxx(x));
    let psi = 0.5 * x * d;
    let psi_x = 0.5 * (d + x * dd);
    let psi_xx = 0.5 * (2.0 * dd + x * ddd);
    PsiEval {
        psi,
        psi_x,
        psi_xx,
        corrector_residual: psi_xx + (1.0 - 3.0 * v * v) * psi + nonlinearity(v),
    }
}

#[inline]
pub fn psi(x: f64) -> f64 {
    0.5 * x * hx(x)
}

/// ∫ψH_x over the default window.
pub fn psi_orthogonality() -> f64 {
    GaussLegendre::new(GL_ORDER).integrate_panels(-WINDOW, WINDOW, PANEL, |x| psi(x) * hx(x))
}

/// C² quintic smoothstep: 0 for u ≤ 0, 1 for u ≥ 1.
#[inline]
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }
}

/// Partition of unity over N layers at one θ: χ_j = 1 on the plateau around f_j,
/// ramps of half-width δ̃ centred on the midpoints between neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFamily {
    edges: Vec<(f64, f64)>,
    delta_tilde: f64,
}

impl CutoffFamily {
    /// Cutoffs for sorted layer depths `f` (stretched units) with profile scale `beta`.
    pub fn new(f: &[f64], beta: f64, delta_tilde: f64) -> Result<Self, ProfileError> {
        Self::with_window_scale(f, beta, delta_tilde, 1.0)
    }

    /// `window_scale < 1` shrinks each support towards its layer (the sum is then
    /// no longer one); used for sensitivity studies.
    pub fn with_window_scale(f: &[f64], beta: f64, delta_tilde: f64, window_scale: f64) -> Result<Self, ProfileError> {
        let n = f.len();
        for j in 0..n.saturating_sub(1) {
            let gap = f[j + 1] - f[j];
            if gap * beta < 4.0 {
                return Err(ProfileError::Separation {
                    j: j + 1,
                    next: j + 2,
                    gap,
                    required: 4.0 / beta,
                });
            }
        }
        let edges = (0..n)
            .map(|j| {
                let lo = if j == 0 {
                    f[0] * (1.0 - window_scale)
                } else {
                    f[j] - 0.5 * window_scale * (f[j] - f[j - 1])
                };
                let hi = if j + 1 == n {
                    f64::INFINITY
                } else {
                    f[j] + 0.5 * window_scale * (f[j + 1] - f[j])
                };
                (lo, hi)
            })
            .collect::<Vec<(f64, f64)>>();
        // neighbouring ramps must not overlap
        for (j, &(lo, hi)) in edges.iter().enumerate() {
            if hi - lo < 2.0 * delta_tilde {
                return Err(ProfileError::Separation {
                    j: j + 1,
                    next: j + 2,
                    gap: hi - lo,
                    required: 2.0 * delta_tilde,
                });
            }
        }
        Ok(Self { edges, delta_tilde })
    }

    pub fn layers(&self) -> usize {
        self.edges.len()
    }

    /// χ_j(s) for j = 1..N.
    pub fn chi(&self, j: usize, s: f64) -> f64 {
        let (lo, hi) = self.edges[j - 1];
        let d = self.delta_tilde;
        let rise = if j == 1 {
            // the first ramp sits entirely below its edge so that Σχ = 1 for s ≥ 0
            smoothstep((s - lo + d) / d)
        } else {
            smoothstep((s - lo + d) / (2.0 * d))
        };
        let fall = if hi.is_infinite() {
            0.0
        } else {
            smoothstep((s - hi + d) / (2.0 * d))
        };
        rise - fall
    }
}

/// Cutoff-weighted constants for layer j (1-based) at depth f_j:
/// (∫χ_jH_x², ∫χ_jH_x²e^{−√2x}, ∫χ_jH_x²e^{√2x}) with x = β(s − f_j).
pub fn weighted_gammas(cutoffs: &CutoffFamily, j: usize, f_j: f64, beta: f64) -> (f64, f64, f64) {
    let gl = GaussLegendre::new(GL_ORDER);
    let chi = |x: f64| cutoffs.chi(j, f_j + x / beta);
    let q = |w: &dyn Fn(f64) -> f64| gl.integrate_panels(-WINDOW, WINDOW, 0.25, |x| chi(x) * hx(x).powi(2) * w(x));
    (
        q(&|_| 1.0),
        q(&|x| (-SQRT_2 * x).exp()),
        q(&|x| (SQRT_2 * x).exp()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let e = heteroclinic_eval(0.0);
        assert_eq!(e.h, 0.0);
        assert!((e.hx - 1.0 / SQRT_2).abs() < 1e-16);
        assert!((h(1.0) - 0.608_859_3).abs() < 1e-6);
        assert!((psi(2.0) - hx(2.0)).abs() < 1e-16);
        assert!((psi(2.0) - 0.149_037_67).abs() < 1e-8);
    }

    #[test]
    fn ode_and_first_integral() {
        for i in -400..=400 {
            let x = 0.05 * i as f64;
            let e = heteroclinic_eval(x);
            assert!(e.ode_residual.abs() < 1e-12);
            assert!((1.0 - e.h * e.h - SQRT_2 * e.hx).abs() < 1e-12);
            assert_eq!(h(-x), -h(x));
            assert_eq!(psi(-x), -psi(x));
        }
    }

    #[test]
    fn asymptotic_tail() {
        let x: f64 = 20.0;
        assert!((h(x) - (1.0 - 2.0 * (-x * SQRT_2).exp())).abs() < 1e-10);
        // next term of the expansion is 2e^{−2√2|x|}
        for x in [10.5f64, 12.0, -15.0] {
            let bound = 2.0 * (-2.0 * SQRT_2 * x.abs()).exp() + 1e-16;
            assert!((h(x) - asymptotic_h(x)).abs() <= bound);
        }
    }

    #[test]
    fn integral_constants() {
        let p = profile_integrals();
        assert!((p.gamma0 - GAMMA0).abs() < 1e-12);
        assert!((p.gamma1 - GAMMA1).abs() < 1e-12);
        assert!((p.identity1 - IDENTITY1).abs() < 1e-12);
        assert!((p.identity2 - IDENTITY2).abs() < 1e-11);
        let wide = profile_integrals_on(50.0).unwrap();
        assert!((wide.gamma0 - p.gamma0).abs() < 1e-12);
        assert!((wide.gamma1 - p.gamma1).abs() < 1e-12);
        assert!(matches!(profile_integrals_on(10.0), Err(ProfileError::WindowTooSmall { .. })));
    }

    #[test]
    fn corrector() {
        assert!(psi_orthogonality().abs() < 1e-12);
        for i in -400..=400 {
            assert!(psi_eval(0.05 * i as f64).corrector_residual.abs() < 1e-10);
        }
    }

    #[test]
    fn partition_of_unity() {
        let f = [3.0, 9.0, 16.0];
        let c = CutoffFamily::new(&f, 1.0, 2.0).unwrap();
        for i in 0..400 {
            let s = 0.05 * i as f64;
            let sum: f64 = (1..=3).map(|j| c.chi(j, s)).sum();
            assert!((sum - 1.0).abs() < 1e-14, "s={s}");
            for j in 1..=3 {
                let v = c.chi(j, s);
                assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            }
        }
        assert_eq!(c.chi(2, 9.0), 1.0);
        assert!(CutoffFamily::new(&[3.0, 5.0], 1.0, 2.0).is_err());
    }

    #[test]
    fn unit_cutoff_recovers_constants() {
        let c = CutoffFamily::new(&[60.0], 1.0, 2.0).unwrap();
        let (g0, g1, g2) = weighted_gammas(&c, 1, 60.0, 1.0);
        assert!((g0 - GAMMA0).abs() < 1e-12);
        assert!((g1 - GAMMA1).abs() < 1e-12);
        assert!((g2 - GAMMA1).abs() < 1e-12);
    }
}
