//! Run configuration: one TOML document per run, unknown keys rejected.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{
    BoundaryCurve, CollarTablePotential, ConstantPotential, Geometry, Potential, RadialPotential,
};
use crate::pde::{RadialOptions, StripOptions};
use crate::placement::WeightMode;

use super::ExperimentError;

/// Arclength samples used to tabulate non-circular curves.
pub const CURVE_SAMPLES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Predict,
    SolveRadial,
    SolveStrip,
    TodaSolve,
    ResonanceScan,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Predict => "predict",
            Self::SolveRadial => "solve-radial",
            Self::SolveStrip => "solve-strip",
            Self::TodaSolve => "toda-solve",
            Self::ResonanceScan => "resonance-scan",
            Self::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// Closed polygon through the given points, resampled by arclength.
    Sampled { points: Vec<[f64; 2]> },
}

impl Default for CurveSpec {
    fn default() -> Self {
        Self::Circle { radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant { value: f64 },
    /// V = Σ c_k |y − center|^k.
    Radial { center: [f64; 2], coeffs: Vec<f64> },
    /// V(t, θ) = Σ c_k(θ) t^k; `tables[k]` samples c_k uniformly in θ.
    ExprTable { tables: Vec<Vec<f64>> },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::Constant { value: 1.0 }
    }
}

/// ε grid and eigen strategy for the resonance scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanOptions {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// θ nodes of the periodic operators.
    pub nodes: usize,
    pub strategy: String,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            lo: 1e-4,
            hi: 1e-2,
            points: 200,
            nodes: 4096,
            strategy: "sturm".into(),
        }
    }
}

/// Reduced-system solve with the synthetic forcing h = amplitude·ε^{5/4}cos(2πmθ/ℓ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TodaOptions {
    pub nodes: usize,
    pub amplitude: f64,
    pub mode: usize,
    pub tol: f64,
}

impl Default for TodaOptions {
    fn default() -> Self {
        Self {
            nodes: 1024,
            amplitude: 1.0,
            mode: 1,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    /// Sorted descending; strip solves warm-start each ε from the previous one.
    pub eps: Vec<f64>,
    #[serde(default = "default_out")]
    pub out: String,
    #[serde(default)]
    pub curve: CurveSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    /// θ nodes for placement tables.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub gamma_weighted: bool,
    #[serde(default = "default_delta_tilde")]
    pub delta_tilde: f64,
    /// Resonance threshold as a multiple of ε.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Criterion ids for `verify`; empty means all.
    #[serde(default)]
    pub criteria: Vec<u32>,
    #[serde(default)]
    pub radial: RadialOptions,
    #[serde(default)]
    pub strip: StripOptions,
    #[serde(default)]
    pub scan: ScanOptions,
    #[serde(default)]
    pub toda: TodaOptions,
}

fn default_out() -> String {
    "runs".into()
}

fn default_nodes() -> usize {
    256
}

fn default_delta_tilde() -> f64 {
    2.0
}

fn default_threshold() -> f64 {
    0.1
}

impl RunConfig {
    pub fn new(kind: ExperimentKind, n: usize, eps: Vec<f64>) -> Self {
        Self {
            kind,
            n,
            eps,
            out: default_out(),
            curve: CurveSpec::default(),
            potential: PotentialSpec::default(),
            nodes: default_nodes(),
            gamma_weighted: false,
            delta_tilde: default_delta_tilde(),
            threshold: default_threshold(),
            criteria: Vec::new(),
            radial: RadialOptions::default(),
            strip: StripOptions::default(),
            scan: ScanOptions::default(),
            toda: TodaOptions::default(),
        }
    }

    /// Parses and validates a TOML document.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML text; `parse(to_toml(c)) == c`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the canonical text with `out` cleared, hex encoded, so the
    /// same run hashes alike wherever it is written.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out.clear();
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |path: &str, why: &str| Err(ExperimentError::Config(format!("{path}: {why}")));
        if self.n == 0 && self.kind != ExperimentKind::Verify {
            return bad("n", "must be at least 1");
        }
        if self.eps.is_empty() && !matches!(self.kind, ExperimentKind::Verify | ExperimentKind::ResonanceScan) {
            return bad("eps", "needs at least one value");
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return bad("eps", &format!("{e} is outside (0, 1)"));
        }
        if self.eps.windows(2).any(|w| w[0] <= w[1]) {
            return bad("eps", "must be strictly decreasing (continuation order)");
        }
        if self.nodes < 3 {
            return bad("nodes", "must be at least 3");
        }
        if !(self.delta_tilde > 0.0) {
            return bad("delta_tilde", "must be positive");
        }
        if !(self.threshold > 0.0) {
            return bad("threshold", "must be positive");
        }
        if let Some(c) = self.criteria.iter().find(|c| !(1..=8).contains(*c)) {
            return bad("criteria", &format!("{c} is not a criterion id (1..=8)"));
        }
        match &self.curve {
            CurveSpec::Circle { radius } if !(*radius > 0.0) => return bad("curve.radius", "must be positive"),
            CurveSpec::Ellipse { a, b } if !(*a > 0.0 && *b > 0.0) => return bad("curve.a/b", "must be positive"),
            CurveSpec::Sampled { points } if points.len() < 8 => return bad("curve.points", "need at least 8 points"),
            _ => {}
        }
        if let PotentialSpec::Constant { value } = self.potential {
            if !(value > 0.0) {
                return bad("potential.value", "must be positive");
            }
        }
        if self.strip.ns < 8 || self.strip.nz < 4 {
            return bad("strip.ns/nz", "grid too small");
        }
        let s = &self.scan;
        if !(s.lo > 0.0 && s.hi > s.lo) || s.points < 3 || s.nodes < 3 {
            return bad("scan", "need 0 < lo < hi, points ≥ 3, nodes ≥ 3");
        }
        if self.toda.nodes < crate::toda::MIN_NODES {
            return bad("toda.nodes", &format!("must be at least {}", crate::toda::MIN_NODES));
        }
        Ok(())
    }

    pub fn weight_mode(&self) -> WeightMode {
        if self.gamma_weighted {
            WeightMode::Cutoff {
                delta_tilde: self.delta_tilde,
            }
        } else {
            WeightMode::Unweighted
        }
    }

    pub fn build_curve(&self) -> Result<Arc<BoundaryCurve>, ExperimentError> {
        let c = match &self.curve {
            CurveSpec::Circle { radius } => BoundaryCurve::circle(*radius, CURVE_SAMPLES)?,
            CurveSpec::Ellipse { a, b } => BoundaryCurve::ellipse(*a, *b, CURVE_SAMPLES)?,
            CurveSpec::Sampled { points } => BoundaryCurve::sampled(points, CURVE_SAMPLES)?,
        };
        Ok(Arc::new(c))
    }

    pub fn build_geometry(&self) -> Result<Geometry, ExperimentError> {
        let curve = self.build_curve()?;
        let potential: Arc<dyn Potential> = match &self.potential {
            PotentialSpec::Constant { value } => Arc::new(ConstantPotential(*value)),
            PotentialSpec::Radial { center, coeffs } => Arc::new(RadialPotential {
                center: *center,
                coeffs: coeffs.clone(),
            }),
            PotentialSpec::ExprTable { tables } => Arc::new(CollarTablePotential::new(curve.clone(), tables.clone())?),
        };
        Ok(Geometry::new(curve, potential))
    }

    /// The radial potential for disk solves; only circles qualify.
    pub fn radial_potential(&self) -> Result<RadialPotential, ExperimentError> {
        let radius = match self.curve {
            CurveSpec::Circle { radius } => radius,
            _ => return Err(ExperimentError::Config("curve: solve-radial needs a circle".into())),
        };
        if (radius - 1.0).abs() > 1e-12 {
            return Err(ExperimentError::Config("curve.radius: solve-radial works on the unit disk".into()));
        }
        match &self.potential {
            PotentialSpec::Constant { value } => Ok(RadialPotential {
                center: [0.0, 0.0],
                coeffs: vec![*value],
            }),
            PotentialSpec::Radial { center, coeffs } if center[0] == 0.0 && center[1] == 0.0 => Ok(RadialPotential {
                center: *center,
                coeffs: coeffs.clone(),
            }),
            _ => Err(ExperimentError::Config(
                "potential: solve-radial needs a constant or origin-centred radial potential".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
kind = "solve-strip"
n = 1
eps = [0.02, 0.01]

[curve]
kind = "ellipse"
a = 1.2
b = 1.0

[strip]
ns = 256
nz = 64
"#;

    #[test]
    fn parse_and_round_trip() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.curve, CurveSpec::Ellipse { a: 1.2, b: 1.0 });
        assert_eq!(c.strip.ns, 256);
        let text = c.to_toml();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml(), text);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse(&format!("{SAMPLE}\nnewton_tol = 1e-9\n")).unwrap_err();
        assert!(err.to_string().contains("newton_tol"), "{err}");
        let err = RunConfig::parse(&SAMPLE.replace("ns = 256", "ns = 256\ntoll = 1.0")).unwrap_err();
        assert!(err.to_string().contains("toll"), "{err}");
    }

    #[test]
    fn eps_must_descend() {
        let err = RunConfig::parse(&SAMPLE.replace("[0.02, 0.01]", "[0.01, 0.02]")).unwrap_err();
        assert!(err.to_string().contains("eps"), "{err}");
    }
}
