//! Closed unit-speed boundary curves.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::numerics::{adaptive_simpson, PeriodicSpline};

/// Largest tolerated deviation of |γ_θ| from one.
pub const UNIT_SPEED_TOL: f64 = 1e-6;
const ARCLENGTH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CurveKind {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Sampled,
}

/// Unit tangent, outward unit normal and signed curvature at one arclength position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub k: f64,
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
enum Shape {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64, phase: EllipsePhase },
    /// Tangent angle minus its linear growth 2πθ/ℓ.
    Sampled { turning: PeriodicSpline },
}

/// Arclength-to-angle map of an ellipse, tabulated at the arclength nodes.
#[derive(Debug, Clone)]
struct EllipsePhase {
    h: f64,
    node_phi: Vec<f64>,
}

impl EllipsePhase {
    fn speed(a: f64, b: f64, phi: f64) -> f64 {
        (a * a * phi.sin().powi(2) + b * b * phi.cos().powi(2)).sqrt()
    }

    fn build(a: f64, b: f64, n: usize) -> (f64, Self) {
        let speed = |p: f64| Self::speed(a, b, p);
        let length = adaptive_simpson(&speed, 0.0, 2.0 * PI, ARCLENGTH_TOL);
        let h = length / n as f64;
        let mut node_phi = Vec::with_capacity(n);
        let mut phi = 0.0;
        for i in 0..n {
            if i > 0 {
                phi = Self::solve_from(a, b, node_phi[i - 1], h, phi + h / speed(phi));
            }
            node_phi.push(phi);
        }
        (length, Self { h, node_phi })
    }

    /// Angle φ with arclength(φ0 → φ) = ds, Newton from `guess`.
    fn solve_from(a: f64, b: f64, phi0: f64, ds: f64, guess: f64) -> f64 {
        let speed = |p: f64| Self::speed(a, b, p);
        let mut phi = guess;
        for _ in 0..20 {
            let g = adaptive_simpson(&speed, phi0, phi, ARCLENGTH_TOL) - ds;
            let step = g / speed(phi);
            phi -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        phi
    }

    fn phi(&self, a: f64, b: f64, length: f64, theta: f64) -> f64 {
        let n = self.node_phi.len();
        let t = theta.rem_euclid(length);
        let i = ((t / self.h).floor() as usize).min(n - 1);
        let ds = t - i as f64 * self.h;
        let phi0 = self.node_phi[i];
        let phi = Self::solve_from(a, b, phi0, ds, phi0 + ds / Self::speed(a, b, phi0));
        phi + 2.0 * PI * (theta - t) / length
    }
}

/// Closed, positively oriented, arclength-parameterized planar curve.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    kind: CurveKind,
    length: f64,
    center: [f64; 2],
    xs: PeriodicSpline,
    ys: PeriodicSpline,
    shape: Shape,
    speed_defect: f64,
}

impl BoundaryCurve {
    pub fn circle(radius: f64, samples: usize) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidCurve(format!("circle radius {radius} must be positive")));
        }
        let length = 2.0 * PI * radius;
        let pts: Vec<[f64; 2]> = (0..samples)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / samples as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Ok(Self::assemble(
            CurveKind::Circle { radius },
            length,
            [0.0, 0.0],
            &pts,
            Shape::Circle { radius },
        ))
    }

    /// Ellipse with semi-axes `a` (x) and `b` (y), θ = 0 at (a, 0).
    pub fn ellipse(a: f64, b: f64, samples: usize) -> Result<Self, GeometryError> {
        if !(a > 0.0 && b > 0.0) {
            return Err(GeometryError::InvalidCurve(format!("ellipse axes ({a}, {b}) must be positive")));
        }
        let (length, phase) = EllipsePhase::build(a, b, samples);
        let pts: Vec<[f64; 2]> = phase
            .node_phi
            .iter()
            .map(|p| [a * p.cos(), b * p.sin()])
            .collect();
        Ok(Self::assemble(
            CurveKind::Ellipse { a, b },
            length,
            [0.0, 0.0],
            &pts,
            Shape::Ellipse { a, b, phase },
        ))
    }

    /// Closed curve through `points` (any regular parameterization, either
    /// orientation), resampled at `samples` uniform arclength nodes.
    pub fn sampled(points: &[[f64; 2]], samples: usize) -> Result<Self, GeometryError> {
        if points.len() < 8 {
            return Err(GeometryError::InvalidCurve("need at least 8 points".into()));
        }
        let mut pts = points.to_vec();
        if signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        let m = pts.len();
        let px = PeriodicSpline::new(0.0, m as f64, pts.iter().map(|p| p[0]).collect());
        let py = PeriodicSpline::new(0.0, m as f64, pts.iter().map(|p| p[1]).collect());
        let speed = |p: f64| px.derivative(p).hypot(py.derivative(p));
        let seg: Vec<f64> = (0..m)
            .map(|i| adaptive_simpson(&speed, i as f64, i as f64 + 1.0, ARCLENGTH_TOL))
            .collect();
        let length: f64 = seg.iter().sum();
        if !(length > 0.0) {
            return Err(GeometryError::InvalidCurve("degenerate curve".into()));
        }
        let h = length / samples as f64;
        let mut out = Vec::with_capacity(samples);
        let mut acc = 0.0;
        let mut i = 0;
        for q in 0..samples {
            let target = q as f64 * h;
            while i + 1 < m && acc + seg[i] < target {
                acc += seg[i];
                i += 1;
            }
            let ds = target - acc;
            let mut p = i as f64 + ds / seg[i];
            for _ in 0..30 {
                let g = adaptive_simpson(&speed, i as f64, p, ARCLENGTH_TOL) - ds;
                let step = g / speed(p);
                p -= step;
                if step.abs() < 1e-14 {
                    break;
                }
            }
            out.push([px.eval(p), py.eval(p)]);
        }
        Self::from_arclength_samples(&out, length)
    }

    /// Trusts `points` to be uniform-arclength samples of a positively oriented
    /// closed curve of total length `length`.
    pub fn from_arclength_samples(points: &[[f64; 2]], length: f64) -> Result<Self, GeometryError> {
        if points.len() < 8 || !(length > 0.0) {
            return Err(GeometryError::InvalidCurve("need at least 8 samples and positive length".into()));
        }
        let n = points.len() as f64;
        let center = [
            points.iter().map(|p| p[0]).sum::<f64>() / n,
            points.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
        let xs = PeriodicSpline::new(0.0, length, points.iter().map(|p| p[0]).collect());
        let ys = PeriodicSpline::new(0.0, length, points.iter().map(|p| p[1]).collect());
        let h = length / n;
        // curvature as the derivative of the unwrapped tangent angle: the periodic
        // part is splined, so total turning is exactly 2π
        let mut prev = 0.0;
        let turning: Vec<f64> = (0..points.len())
            .map(|i| {
                let t = i as f64 * h;
                let mut a = ys.derivative(t).atan2(xs.derivative(t));
                if i > 0 {
                    a += 2.0 * PI * ((prev - a) / (2.0 * PI)).round();
                }
                prev = a;
                a - 2.0 * PI * t / length
            })
            .collect();
        let shape = Shape::Sampled {
            turning: PeriodicSpline::new(0.0, length, turning),
        };
        let mut curve = Self {
            kind: CurveKind::Sampled,
            length,
            center,
            xs,
            ys,
            shape,
            speed_defect: 0.0,
        };
        curve.speed_defect = curve.measure_speed_defect();
        Ok(curve)
    }

    fn assemble(kind: CurveKind, length: f64, center: [f64; 2], pts: &[[f64; 2]], shape: Shape) -> Self {
        let xs = PeriodicSpline::new(0.0, length, pts.iter().map(|p| p[0]).collect());
        let ys = PeriodicSpline::new(0.0, length, pts.iter().map(|p| p[1]).collect());
        let mut curve = Self {
            kind,
            length,
            center,
            xs,
            ys,
            shape,
            speed_defect: 0.0,
        };
        curve.speed_defect = curve.measure_speed_defect();
        curve
    }

    /// max | |γ_θ| − 1 | of the interpolant, probed at nodes and midpoints.
    fn measure_speed_defect(&self) -> f64 {
        let n = self.samples();
        let h = self.length / n as f64;
        (0..2 * n)
            .map(|i| {
                let t = 0.5 * h * i as f64;
                (self.xs.derivative(t).hypot(self.ys.derivative(t)) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn samples(&self) -> usize {
        self.xs.samples().len()
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    /// Deviation of the stored interpolant from unit speed.
    pub fn speed_defect(&self) -> f64 {
        self.speed_defect
    }

    /// Diameter estimate from the sample cloud (bounding-box diagonal).
    pub fn diameter(&self) -> f64 {
        let (xs, ys) = (self.xs.samples(), self.ys.samples());
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        span(xs).hypot(span(ys))
    }

    pub fn point(&self, theta: f64) -> [f64; 2] {
        match &self.shape {
            Shape::Circle { radius } => {
                let a = theta / radius;
                [self.center[0] + radius * a.cos(), self.center[1] + radius * a.sin()]
            }
            Shape::Ellipse { a, b, phase } => {
                let p = phase.phi(*a, *b, self.length, theta);
                [self.center[0] + a * p.cos(), self.center[1] + b * p.sin()]
            }
            Shape::Sampled { .. } => [self.xs.eval(theta), self.ys.eval(theta)],
        }
    }

    /// Curvature, unit tangent and outward normal; the unit circle has k = 1.
    pub fn frame(&self, theta: f64) -> Result<Frame, GeometryError> {
        if self.speed_defect > UNIT_SPEED_TOL {
            return Err(GeometryError::NotUnitSpeed {
                defect: self.speed_defect,
            });
        }
        Ok(self.frame_unchecked(theta))
    }

    pub(crate) fn frame_unchecked(&self, theta: f64) -> Frame {
        match &self.shape {
            Shape::Circle { radius } => {
                let a = theta / radius;
                Frame {
                    k: 1.0 / radius,
                    tangent: [-a.sin(), a.cos()],
                    normal: [a.cos(), a.sin()],
                }
            }
            Shape::Ellipse { a, b, phase } => {
                let p = phase.phi(*a, *b, self.length, theta);
                let sp = EllipsePhase::speed(*a, *b, p);
                let t = [-a * p.sin() / sp, b * p.cos() / sp];
                Frame {
                    k: a * b / sp.powi(3),
                    tangent: t,
                    normal: [t[1], -t[0]],
                }
            }
            Shape::Sampled { turning } => {
                let (dx, dy) = (self.xs.derivative(theta), self.ys.derivative(theta));
                let sp = dx.hypot(dy);
                let t = [dx / sp, dy / sp];
                Frame {
                    k: turning.derivative(theta) + 2.0 * PI / self.length,
                    tangent: t,
                    normal: [t[1], -t[0]],
                }
            }
        }
    }

    pub fn curvature(&self, theta: f64) -> f64 {
        self.frame_unchecked(theta).k
    }

    /// dk/dθ.
    pub fn curvature_derivative(&self, theta: f64) -> f64 {
        match &self.shape {
            Shape::Circle { .. } => 0.0,
            Shape::Ellipse { a, b, phase } => {
                let p = phase.phi(*a, *b, self.length, theta);
                let sp = EllipsePhase::speed(*a, *b, p);
                let dsp = (a * a - b * b) * p.sin() * p.cos() / sp;
                -3.0 * a * b * dsp / sp.powi(5)
            }
            Shape::Sampled { turning } => turning.eval_all(theta).2,
        }
    }

    /// Largest |k| over the arclength nodes and midpoints.
    pub fn max_abs_curvature(&self) -> f64 {
        let n = self.samples();
        let h = self.length / n as f64;
        (0..2 * n)
            .map(|i| self.curvature(0.5 * h * i as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Closest-point projection: returns (t, θ) with y = γ(θ) − t ν(θ),
    /// t > 0 inside the domain.
    pub fn project(&self, y: [f64; 2]) -> (f64, f64) {
        let n = self.samples();
        let h = self.length / n as f64;
        let (xs, ys) = (self.xs.samples(), self.ys.samples());
        let mut best = 0;
        let mut dmin = f64::INFINITY;
        for i in 0..n {
            let d = (y[0] - xs[i]).powi(2) + (y[1] - ys[i]).powi(2);
            if d < dmin {
                dmin = d;
                best = i;
            }
        }
        let mut theta = best as f64 * h;
        for _ in 0..50 {
            let p = self.point(theta);
            let f = self.frame_unchecked(theta);
            let d = [y[0] - p[0], y[1] - p[1]];
            let t = -(d[0] * f.normal[0] + d[1] * f.normal[1]);
            let g = d[0] * f.tangent[0] + d[1] * f.tangent[1];
            let dg = -1.0 + f.k * t;
            let step = (g / dg).clamp(-h, h);
            theta -= step;
            if step.abs() < 1e-15 * self.length.max(1.0) {
                break;
            }
        }
        theta = theta.rem_euclid(self.length);
        let p = self.point(theta);
        let f = self.frame_unchecked(theta);
        let t = -((y[0] - p[0]) * f.normal[0] + (y[1] - p[1]) * f.normal[1]);
        (t, theta)
    }
}

fn signed_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::GaussLegendre;

    #[test]
    fn circle_frames() {
        for r in [1.0, 2.0] {
            let c = BoundaryCurve::circle(r, 256).unwrap();
            for i in 0..10 {
                let f = c.frame(0.61 * i as f64).unwrap();
                assert!((f.k - 1.0 / r).abs() < 1e-15);
                assert!((f.tangent[0] * f.normal[0] + f.tangent[1] * f.normal[1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ellipse_curvature_at_vertex() {
        let e = BoundaryCurve::ellipse(2.0, 1.0, 2048).unwrap();
        let f = e.frame(0.0).unwrap();
        assert!((f.k - 2.0).abs() < 1e-12);
        // independent check: turning rate of the tangent along arclength
        let h = 1e-4;
        let ang = |t: f64| {
            let f = e.frame(t).unwrap();
            f.tangent[1].atan2(f.tangent[0])
        };
        let fd = (ang(h) - ang(-h)) / (2.0 * h);
        assert!((fd - 2.0).abs() < 1e-6);
        assert!(e.speed_defect() < 1e-8, "{}", e.speed_defect());
    }

    #[test]
    fn ellipse_curvature_derivative_matches_finite_difference() {
        let e = BoundaryCurve::ellipse(1.2, 1.0, 512).unwrap();
        for t in [0.3, 1.7, 4.0] {
            let h = 1e-5;
            let fd = (e.curvature(t + h) - e.curvature(t - h)) / (2.0 * h);
            assert!((fd - e.curvature_derivative(t)).abs() < 1e-7);
        }
    }

    #[test]
    fn total_curvature_is_two_pi() {
        let gl = GaussLegendre::new(8);
        for c in [
            BoundaryCurve::circle(1.5, 128).unwrap(),
            BoundaryCurve::ellipse(1.2, 1.0, 512).unwrap(),
        ] {
            let tot = gl.integrate_panels(0.0, c.length(), c.length() / 200.0, |t| c.curvature(t));
            assert!((tot - 2.0 * PI).abs() < 1e-6);
        }
    }

    #[test]
    fn sampled_curve_reparameterizes_and_reorients() {
        // clockwise, non-uniform parameterization of an ellipse
        let pts: Vec<[f64; 2]> = (0..400)
            .map(|i| {
                let u = 2.0 * PI * i as f64 / 400.0;
                let p = u + 0.2 * u.sin();
                [1.2 * p.cos(), -p.sin()]
            })
            .collect();
        let c = BoundaryCurve::sampled(&pts, 1024).unwrap();
        let e = BoundaryCurve::ellipse(1.2, 1.0, 1024).unwrap();
        assert!((c.length() - e.length()).abs() < 1e-8);
        assert!(c.speed_defect() < 1e-8, "{}", c.speed_defect());
        let f = c.frame(0.0).unwrap();
        assert!(f.k > 0.0);
        // curvature integral
        let gl = GaussLegendre::new(8);
        let tot = gl.integrate_panels(0.0, c.length(), c.length() / 256.0, |t| c.curvature(t));
        assert!((tot - 2.0 * PI).abs() < 1e-6, "{tot}");
    }

    #[test]
    fn non_unit_speed_is_rejected() {
        let pts: Vec<[f64; 2]> = (0..64)
            .map(|i| {
                let u = 2.0 * PI * i as f64 / 64.0;
                let p = u + 0.3 * u.sin();
                [p.cos(), p.sin()]
            })
            .collect();
        let c = BoundaryCurve::from_arclength_samples(&pts, 2.0 * PI).unwrap();
        assert!(matches!(c.frame(0.1), Err(GeometryError::NotUnitSpeed { .. })));
    }

    #[test]
    fn projection_inverts_normal_offset() {
        let e = BoundaryCurve::ellipse(1.2, 1.0, 512).unwrap();
        for (t, th) in [(0.05, 0.3), (0.2, 2.5), (-0.1, 5.0)] {
            let p = e.point(th);
            let f = e.frame(th).unwrap();
            let y = [p[0] - t * f.normal[0], p[1] - t * f.normal[1]];
            let (t2, th2) = e.project(y);
            assert!((t - t2).abs() < 1e-11);
            assert!((th - th2).abs() < 1e-10);
        }
    }
}
