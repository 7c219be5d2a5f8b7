//! Inhomogeneity potentials V > 0 and their boundary traces.

use std::fmt;
use std::sync::Arc;

use super::{BoundaryCurve, GeometryError};
use crate::numerics::PeriodicSpline;

/// A potential V on the closed domain. Collar-defined potentials override
/// [`Potential::collar_value`] and may supply exact normal derivatives.
pub trait Potential: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;

    /// V at a physical point.
    fn value(&self, y: [f64; 2]) -> f64;

    /// V at collar coordinates (t, θ): the point γ(θ) − tν(θ).
    fn collar_value(&self, curve: &BoundaryCurve, t: f64, theta: f64) -> f64 {
        let p = curve.point(theta);
        let n = curve.frame_unchecked(theta).normal;
        self.value([p[0] - t * n[0], p[1] - t * n[1]])
    }

    /// Exact (V, V_t, V_tt) at t = 0, if known.
    fn exact_traces(&self, _curve: &BoundaryCurve, _theta: f64) -> Option<[f64; 3]> {
        None
    }
}

/// Boundary trace of the potential: β = V(0,θ)^{1/2}, β₁ = V_t(0,θ), β₂ = V_tt(0,θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Normal derivatives by 4th-order one-sided differences into the domain.
pub fn finite_difference_traces(potential: &dyn Potential, curve: &BoundaryCurve, theta: f64) -> [f64; 3] {
    let h = 1e-4 * curve.diameter();
    let f: Vec<f64> = (0..6)
        .map(|j| potential.collar_value(curve, j as f64 * h, theta))
        .collect();
    let d1 = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    let d2 = (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5])
        / (12.0 * h * h);
    [f[0], d1, d2]
}

/// β, β₁, β₂ at θ; exact traces when the potential provides them.
pub fn potential_trace(potential: &dyn Potential, curve: &BoundaryCurve, theta: f64) -> Result<Trace, GeometryError> {
    let [v, vt, vtt] = potential
        .exact_traces(curve, theta)
        .unwrap_or_else(|| finite_difference_traces(potential, curve, theta));
    if !(v > 0.0) {
        return Err(GeometryError::InvalidPotential(format!(
            "V(0, {theta}) = {v} is not positive"
        )));
    }
    Ok(Trace {
        beta: v.sqrt(),
        beta1: vt,
        beta2: vtt,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantPotential(pub f64);

impl Potential for ConstantPotential {
    fn kind(&self) -> &'static str {
        "constant"
    }
    fn value(&self, _y: [f64; 2]) -> f64 {
        self.0
    }
    fn collar_value(&self, _curve: &BoundaryCurve, _t: f64, _theta: f64) -> f64 {
        self.0
    }
    fn exact_traces(&self, _curve: &BoundaryCurve, _theta: f64) -> Option<[f64; 3]> {
        Some([self.0, 0.0, 0.0])
    }
}

/// V(y) = Σ c_k r^k with r = |y − center|.
#[derive(Debug, Clone)]
pub struct RadialPotential {
    pub center: [f64; 2],
    pub coeffs: Vec<f64>,
}

impl RadialPotential {
    fn poly(&self, r: f64) -> (f64, f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        let mut dd = 0.0;
        for c in self.coeffs.iter().rev() {
            dd = dd * r + 2.0 * d;
            d = d * r + v;
            v = v * r + c;
        }
        (v, d, dd)
    }
}

impl Potential for RadialPotential {
    fn kind(&self) -> &'static str {
        "radial"
    }
    fn value(&self, y: [f64; 2]) -> f64 {
        self.poly((y[0] - self.center[0]).hypot(y[1] - self.center[1])).0
    }
    fn exact_traces(&self, curve: &BoundaryCurve, theta: f64) -> Option<[f64; 3]> {
        // only exact when the boundary is a circle about the same center
        match curve.kind() {
            super::CurveKind::Circle { radius }
                if (curve.center()[0] - self.center[0]).abs() < 1e-14
                    && (curve.center()[1] - self.center[1]).abs() < 1e-14 =>
            {
                let _ = theta;
                let (v, d, dd) = self.poly(radius);
                // t = R − r
                Some([v, -d, dd])
            }
            _ => None,
        }
    }
}

/// V(t, θ) = Σ c_k(θ) t^k in the collar, each c_k tabulated on a uniform θ grid.
#[derive(Debug, Clone)]
pub struct CollarTablePotential {
    curve: Arc<BoundaryCurve>,
    coeffs: Vec<PeriodicSpline>,
}

impl CollarTablePotential {
    /// `tables[k]` holds samples of c_k at θ_i = iℓ/n; a single sample means constant.
    pub fn new(curve: Arc<BoundaryCurve>, tables: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        if tables.is_empty() {
            return Err(GeometryError::InvalidPotential("expr-table needs at least one coefficient".into()));
        }
        let len = curve.length();
        let coeffs = tables
            .into_iter()
            .map(|t| {
                let vals = if t.len() == 1 { vec![t[0]; 4] } else { t };
                if vals.len() < 3 {
                    return Err(GeometryError::InvalidPotential(
                        "coefficient tables need one or at least three samples".into(),
                    ));
                }
                Ok(PeriodicSpline::new(0.0, len, vals))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { curve, coeffs })
    }

    fn coeff(&self, k: usize, theta: f64) -> f64 {
        self.coeffs.get(k).map_or(0.0, |c| c.eval(theta))
    }
}

impl Potential for CollarTablePotential {
    fn kind(&self) -> &'static str {
        "expr-table"
    }
    fn value(&self, y: [f64; 2]) -> f64 {
        let (t, theta) = self.curve.project(y);
        self.collar_value(&self.curve, t, theta)
    }
    fn collar_value(&self, _curve: &BoundaryCurve, t: f64, theta: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c.eval(theta))
    }
    fn exact_traces(&self, _curve: &BoundaryCurve, theta: f64) -> Option<[f64; 3]> {
        Some([self.coeff(0, theta), self.coeff(1, theta), 2.0 * self.coeff(2, theta)])
    }
}

/// Potential given by a closure in collar coordinates V(t, θ).
pub struct CollarFnPotential {
    curve: Arc<BoundaryCurve>,
    f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl CollarFnPotential {
    pub fn new(curve: Arc<BoundaryCurve>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { curve, f: Box::new(f) }
    }
}

impl fmt::Debug for CollarFnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CollarFnPotential")
    }
}

impl Potential for CollarFnPotential {
    fn kind(&self) -> &'static str {
        "collar-fn"
    }
    fn value(&self, y: [f64; 2]) -> f64 {
        let (t, theta) = self.curve.project(y);
        (self.f)(t, theta)
    }
    fn collar_value(&self, _curve: &BoundaryCurve, t: f64, theta: f64) -> f64 {
        (self.f)(t, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_traces() {
        let c = BoundaryCurve::circle(1.0, 64).unwrap();
        let tr = potential_trace(&ConstantPotential(4.0), &c, 0.3).unwrap();
        assert_eq!((tr.beta, tr.beta1, tr.beta2), (2.0, 0.0, 0.0));
    }

    #[test]
    fn linear_collar_trace() {
        let c = Arc::new(BoundaryCurve::circle(1.0, 64).unwrap());
        let p = CollarFnPotential::new(c.clone(), |t, _| 1.0 + t);
        let tr = potential_trace(&p, &c, 1.1).unwrap();
        assert!((tr.beta - 1.0).abs() < 1e-12);
        assert!((tr.beta1 - 1.0).abs() < 1e-9);
        assert!(tr.beta2.abs() < 1e-5);
    }

    #[test]
    fn square_root_trace() {
        let c = Arc::new(BoundaryCurve::circle(1.0, 64).unwrap());
        let p = CollarFnPotential::new(c.clone(), |t, th| (1.0 + (th / 2.0).sin()).powi(2) + t);
        for th in [0.0, 1.0, 2.5] {
            let tr = potential_trace(&p, &c, th).unwrap();
            assert!((tr.beta - (1.0 + (th / 2.0).sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_traces_match_finite_differences() {
        let c = BoundaryCurve::circle(1.0, 64).unwrap();
        let p = RadialPotential {
            center: [0.0, 0.0],
            coeffs: vec![3.0, -1.0, 0.5],
        };
        let exact = p.exact_traces(&c, 0.7).unwrap();
        let fd = finite_difference_traces(&p, &c, 0.7);
        assert!((exact[0] - fd[0]).abs() < 1e-14);
        assert!((exact[1] - fd[1]).abs() < 1e-8);
        assert!((exact[2] - fd[2]).abs() < 1e-4);
        // V = 3 − r + r²/2 → V_t = 1 − R = 0, V_tt = 1 at R = 1
        assert!((exact[1] - 0.0).abs() < 1e-15 && (exact[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn table_traces_match_point_evaluation() {
        let c = Arc::new(BoundaryCurve::ellipse(1.2, 1.0, 256).unwrap());
        let n = 64;
        let l = c.length();
        let c0: Vec<f64> = (0..n).map(|i| 1.5 + 0.2 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect();
        let p = CollarTablePotential::new(c.clone(), vec![c0, vec![0.7], vec![-0.4]]).unwrap();
        let th = 0.37 * l;
        let exact = p.exact_traces(&c, th).unwrap();
        // differences of the physical-point evaluation along −ν
        struct ViaPoint<'a>(&'a CollarTablePotential);
        impl fmt::Debug for ViaPoint<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("ViaPoint")
            }
        }
        impl Potential for ViaPoint<'_> {
            fn kind(&self) -> &'static str {
                "via-point"
            }
            fn value(&self, y: [f64; 2]) -> f64 {
                self.0.value(y)
            }
        }
        let fd = finite_difference_traces(&ViaPoint(&p), &c, th);
        assert!((exact[0] - fd[0]).abs() < 1e-10);
        assert!((exact[1] - fd[1]).abs() < 1e-6);
        assert!((exact[2] - fd[2]).abs() < 1e-3);
    }
}
