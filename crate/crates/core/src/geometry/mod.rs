//! Boundary curve, potential, collar chart and generalized mean curvature.

mod chart;
mod curve;
mod potential;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use chart::FermiChart;
pub use curve::{BoundaryCurve, CurveKind, Frame, UNIT_SPEED_TOL};
pub use potential::{
    finite_difference_traces, potential_trace, CollarFnPotential, CollarTablePotential, ConstantPotential,
    Potential, RadialPotential, Trace,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("curve is not unit speed (max ||γ'| − 1| = {defect:.3e}); reparameterize by arclength")]
    NotUnitSpeed { defect: f64 },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid collar chart: {0}")]
    InvalidChart(String),
    #[error("s = {s} lies outside the collar [0, {s_max})")]
    OutOfChart { s: f64, s_max: f64 },
}

/// Signed curvature with unit tangent and outward normal.
pub fn curvature_and_frame(curve: &BoundaryCurve, theta: f64) -> Result<Frame, GeometryError> {
    curve.frame(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCurvature {
    pub value: f64,
    /// false when the existence hypothesis 𝓗 > 0 fails at this θ.
    pub positive: bool,
}

/// 𝓗(θ) = k(θ) − β₁(θ)/(2β(θ)²).
pub fn generalized_mean_curvature(
    curve: &BoundaryCurve,
    potential: &dyn Potential,
    theta: f64,
) -> Result<MeanCurvature, GeometryError> {
    let k = curve.frame(theta)?.k;
    let tr = potential_trace(potential, curve, theta)?;
    let value = k - tr.beta1 / (2.0 * tr.beta * tr.beta);
    Ok(MeanCurvature {
        value,
        positive: value > 0.0,
    })
}

/// A curve together with its potential.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub curve: Arc<BoundaryCurve>,
    pub potential: Arc<dyn Potential>,
}

impl Geometry {
    pub fn new(curve: Arc<BoundaryCurve>, potential: Arc<dyn Potential>) -> Self {
        Self { curve, potential }
    }

    pub fn traces(&self, nodes: usize) -> Result<BoundaryTraces, GeometryError> {
        BoundaryTraces::sample(&self.curve, self.potential.as_ref(), nodes)
    }
}

/// Per-node boundary data on the uniform grid θ_i = iℓ/M.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryTraces {
    pub length: f64,
    pub theta: Vec<f64>,
    pub k: Vec<f64>,
    pub dk: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub mean_curvature: Vec<f64>,
}

impl BoundaryTraces {
    pub fn sample(curve: &BoundaryCurve, potential: &dyn Potential, nodes: usize) -> Result<Self, GeometryError> {
        assert!(nodes >= 1);
        let length = curve.length();
        let theta: Vec<f64> = (0..nodes).map(|i| length * i as f64 / nodes as f64).collect();
        let rows: Vec<(f64, f64, Trace)> = theta
            .par_iter()
            .map(|&t| Ok((curve.frame(t)?.k, curve.curvature_derivative(t), potential_trace(potential, curve, t)?)))
            .collect::<Result<_, GeometryError>>()?;
        let k: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let dk = rows.iter().map(|r| r.1).collect();
        let beta: Vec<f64> = rows.iter().map(|r| r.2.beta).collect();
        let beta1: Vec<f64> = rows.iter().map(|r| r.2.beta1).collect();
        let beta2 = rows.iter().map(|r| r.2.beta2).collect();
        let mean_curvature = (0..nodes)
            .map(|i| k[i] - beta1[i] / (2.0 * beta[i] * beta[i]))
            .collect();
        Ok(Self {
            length,
            theta,
            k,
            dk,
            beta,
            beta1,
            beta2,
            mean_curvature,
        })
    }

    /// Constant traces on a grid (circle-like test data without a curve).
    pub fn uniform(length: f64, nodes: usize, k: f64, beta: f64, beta1: f64, beta2: f64) -> Self {
        let theta = (0..nodes).map(|i| length * i as f64 / nodes as f64).collect();
        Self {
            length,
            theta,
            k: vec![k; nodes],
            dk: vec![0.0; nodes],
            beta: vec![beta; nodes],
            beta1: vec![beta1; nodes],
            beta2: vec![beta2; nodes],
            mean_curvature: vec![k - beta1 / (2.0 * beta * beta); nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn min_mean_curvature(&self) -> f64 {
        self.mean_curvature.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Fails if 𝓗 ≤ 0 at some node.
    pub fn require_positive_mean_curvature(&self) -> Result<(), GeometryError> {
        match self.mean_curvature.iter().position(|&h| !(h > 0.0)) {
            None => Ok(()),
            Some(i) => Err(GeometryError::InvalidPotential(format!(
                "generalized mean curvature 𝓗 = {} ≤ 0 at θ = {}",
                self.mean_curvature[i], self.theta[i]
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_curvature_examples() {
        let c = Arc::new(BoundaryCurve::circle(1.0, 128).unwrap());
        let h = generalized_mean_curvature(&c, &ConstantPotential(1.0), 0.4).unwrap();
        assert_eq!(h.value, 1.0);
        assert!(h.positive);
        let p = CollarFnPotential::new(c.clone(), |t, _| (2.0 * t).exp());
        let h = generalized_mean_curvature(&c, &p, 0.4).unwrap();
        assert!(h.value.abs() < 1e-8);
        let e = BoundaryCurve::ellipse(1.2, 1.0, 256).unwrap();
        for t in [0.0, 1.0, 3.3] {
            let h = generalized_mean_curvature(&e, &ConstantPotential(2.0), t).unwrap();
            assert_eq!(h.value, e.curvature(t));
        }
    }

    #[test]
    fn nonpositive_potential_is_rejected() {
        let c = BoundaryCurve::circle(1.0, 64).unwrap();
        assert!(matches!(
            generalized_mean_curvature(&c, &ConstantPotential(-1.0), 0.0),
            Err(GeometryError::InvalidPotential(_))
        ));
    }

    #[test]
    fn mean_curvature_is_scale_free() {
        let c = Arc::new(BoundaryCurve::ellipse(1.2, 1.0, 256).unwrap());
        let p1 = CollarTablePotential::new(c.clone(), vec![vec![1.3], vec![0.4]]).unwrap();
        let p2 = CollarTablePotential::new(c.clone(), vec![vec![7.0 * 1.3], vec![7.0 * 0.4]]).unwrap();
        for t in [0.2, 2.0] {
            let a = generalized_mean_curvature(&c, &p1, t).unwrap().value;
            let b = generalized_mean_curvature(&c, &p2, t).unwrap().value;
            assert!((a - b).abs() < 1e-15);
        }
    }
}
