//! Stretched Fermi coordinates on the boundary collar.

use std::sync::Arc;

use super::{BoundaryCurve, GeometryError};

/// Collar chart y = γ(θ) − tν(θ) in stretched units (s, z) = (t, θ)/ε.
#[derive(Debug, Clone)]
pub struct FermiChart {
    curve: Arc<BoundaryCurve>,
    delta0: f64,
    eps: f64,
}

impl FermiChart {
    /// `delta0 = None` picks 0.4 / max|k|.
    pub fn new(curve: Arc<BoundaryCurve>, delta0: Option<f64>, eps: f64) -> Result<Self, GeometryError> {
        let kmax = curve.max_abs_curvature();
        let delta0 = delta0.unwrap_or(0.4 / kmax);
        if !(eps > 0.0) {
            return Err(GeometryError::InvalidChart(format!("ε = {eps} must be positive")));
        }
        if !(delta0 > 0.0) || delta0 * kmax >= 1.0 {
            return Err(GeometryError::InvalidChart(format!(
                "collar half-width δ₀ = {delta0} needs 0 < δ₀·max|k| < 1 (max|k| = {kmax})"
            )));
        }
        Ok(Self { curve, delta0, eps })
    }

    pub fn curve(&self) -> &Arc<BoundaryCurve> {
        &self.curve
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Stretched collar depth δ₀/ε.
    pub fn s_max(&self) -> f64 {
        self.delta0 / self.eps
    }

    /// Stretched period ℓ/ε.
    pub fn z_period(&self) -> f64 {
        self.curve.length() / self.eps
    }

    /// Stretched point γ(εz)/ε − sν(εz) and the metric determinant (1 − εsk)².
    pub fn fermi_map(&self, s: f64, z: f64) -> Result<([f64; 2], f64), GeometryError> {
        if !(0.0..self.s_max()).contains(&s) {
            return Err(GeometryError::OutOfChart { s, s_max: self.s_max() });
        }
        let theta = self.eps * z;
        let p = self.curve.point(theta);
        let f = self.curve.frame_unchecked(theta);
        let e = self.eps;
        let point = [p[0] / e - s * f.normal[0], p[1] / e - s * f.normal[1]];
        let detg = (1.0 - e * s * f.k).powi(2);
        Ok((point, detg))
    }

    /// Inverse of [`FermiChart::fermi_map`].
    pub fn inverse(&self, point: [f64; 2]) -> Result<(f64, f64), GeometryError> {
        let e = self.eps;
        let (t, theta) = self.curve.project([point[0] * e, point[1] * e]);
        let s = t / e;
        if !(0.0..self.s_max()).contains(&s) {
            return Err(GeometryError::OutOfChart { s, s_max: self.s_max() });
        }
        Ok((s, theta / e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_example() {
        let c = Arc::new(BoundaryCurve::circle(1.0, 128).unwrap());
        let ch = FermiChart::new(c, None, 0.1).unwrap();
        let (p, g) = ch.fermi_map(1.0, 0.0).unwrap();
        assert!((p[0].hypot(p[1]) - 9.0).abs() < 1e-12);
        assert!((g - 0.81).abs() < 1e-12);
        let (p0, g0) = ch.fermi_map(0.0, 5.0).unwrap();
        assert!((p0[0].hypot(p0[1]) - 10.0).abs() < 1e-12);
        assert_eq!(g0, 1.0);
    }

    #[test]
    fn out_of_chart_is_rejected() {
        let c = Arc::new(BoundaryCurve::circle(1.0, 128).unwrap());
        let ch = FermiChart::new(c.clone(), Some(0.3), 0.1).unwrap();
        assert!(matches!(ch.fermi_map(3.5, 0.0), Err(GeometryError::OutOfChart { .. })));
        assert!(FermiChart::new(c, Some(1.2), 0.1).is_err());
    }

    #[test]
    fn round_trip() {
        let c = Arc::new(BoundaryCurve::ellipse(1.2, 1.0, 512).unwrap());
        let ch = FermiChart::new(c, None, 0.05).unwrap();
        for (s, z) in [(0.5, 3.0), (4.0, 71.2), (0.01, 130.0)] {
            let (p, _) = ch.fermi_map(s, z).unwrap();
            let (s2, z2) = ch.inverse(p).unwrap();
            assert!((s - s2).abs() < 1e-10 && (z - z2).abs() < 1e-10, "{s} {z} -> {s2} {z2}");
        }
    }
}
