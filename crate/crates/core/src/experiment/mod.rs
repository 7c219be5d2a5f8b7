//! Batch experiment driver: configs, the registry of run kinds, run records and
//! summary reports.

pub mod config;
pub mod criteria;
pub mod kinds;
pub mod report;
pub mod seed;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{CurveSpec, ExperimentKind, PotentialSpec, RunConfig, ScanOptions, TodaOptions};
pub use criteria::{CriterionOutcome, ALL as ALL_CRITERIA};
pub use kinds::{Experiment, ExperimentRegistry};
pub use report::{emit_report, Report};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown experiment kind '{0}'")]
    UnknownKind(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("geometry: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("placement: {0}")]
    Placement(#[from] crate::placement::PlacementError),
    #[error("pde: {0}")]
    Pde(#[from] crate::pde::PdeError),
    #[error("toda: {0}")]
    Toda(#[from] crate::toda::TodaError),
    #[error("seed: {0}")]
    Seed(String),
}

/// Results for one ε of a sweep.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EpsResult {
    pub eps: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
    /// Largest |measured − predicted| layer depth, when a PDE was solved.
    pub max_delta: Option<f64>,
    /// Largest relative depth error, when a PDE was solved.
    pub max_relative: Option<f64>,
    pub seconds: f64,
}

/// A fitted power law y ∝ ε^p with its confidence interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub exponent: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub points: usize,
}

/// Acceptance check as stored in a record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionRecord {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub seconds: f64,
    pub error: Option<String>,
    /// (name, measured, required, passed)
    pub checks: Vec<(String, f64, String, bool)>,
    pub notes: Vec<(String, f64)>,
}

impl From<&CriterionOutcome> for CriterionRecord {
    fn from(o: &CriterionOutcome) -> Self {
        Self {
            id: o.id,
            title: o.title.to_string(),
            passed: o.passed(),
            seconds: o.seconds,
            error: o.error.clone(),
            checks: o
                .checks
                .iter()
                .map(|c| (c.name.clone(), c.measured, c.required.clone(), c.passed))
                .collect(),
            notes: o.notes.iter().map(|n| (n.name.clone(), n.value)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: String,
    pub config_hash: String,
    pub version: String,
    pub run_dir: String,
    pub config: RunConfig,
    pub results: Vec<EpsResult>,
    pub fits: Vec<FitSummary>,
    pub criteria: Vec<CriterionRecord>,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub seconds: f64,
}

impl RunRecord {
    /// False when any ε failed or any acceptance criterion failed.
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.ok) && self.criteria.iter().all(|c| c.passed)
    }

    pub fn load(dir: &Path) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join("record.json"))?)?)
    }
}

/// Per-run state handed to an experiment kind.
pub struct RunContext {
    pub dir: PathBuf,
    pub seed_from: Option<PathBuf>,
    pub record: RunRecord,
}

impl RunContext {
    /// Writes `body` to `rel` inside the run directory and lists it as an artifact.
    pub fn write(&mut self, rel: &str, body: &str) -> Result<(), ExperimentError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body)?;
        if !self.record.artifacts.iter().any(|a| a == rel) {
            self.record.artifacts.push(rel.to_string());
        }
        Ok(())
    }

    /// Newton steps as JSON lines.
    pub fn write_trace<T: Serialize>(&mut self, rel: &str, steps: &[T]) -> Result<(), ExperimentError> {
        let mut body = String::new();
        for s in steps {
            body.push_str(&serde_json::to_string(s)?);
            body.push('\n');
        }
        self.write(rel, &body)
    }
}

/// Subdirectory for one ε of a sweep.
pub fn eps_dir(eps: f64) -> String {
    format!("eps_{eps:.4e}")
}

/// Runs `config` into `<out>/<kind>-<hash12>/`, writing `config.toml` and
/// `record.json` next to the artifacts.
pub fn run_experiment(config: &RunConfig, seed_from: Option<&Path>) -> Result<RunRecord, ExperimentError> {
    config.validate()?;
    let registry = ExperimentRegistry::default();
    let kind = registry.create(config.kind.name())?;
    let hash = config.hash();
    let dir = Path::new(&config.out).join(format!("{}-{}", config.kind.name(), &hash[..12]));
    fs::create_dir_all(&dir)?;
    let mut ctx = RunContext {
        dir: dir.clone(),
        seed_from: seed_from.map(Path::to_path_buf),
        record: RunRecord {
            kind: config.kind.name().to_string(),
            config_hash: hash,
            version: VERSION.to_string(),
            run_dir: dir.display().to_string(),
            config: config.clone(),
            results: Vec::new(),
            fits: Vec::new(),
            criteria: Vec::new(),
            artifacts: Vec::new(),
            seconds: 0.0,
        },
    };
    ctx.write("config.toml", &config.to_toml())?;
    let start = Instant::now();
    kind.run(config, &mut ctx)?;
    ctx.record.seconds = start.elapsed().as_secs_f64();
    fs::write(dir.join("record.json"), serde_json::to_string_pretty(&ctx.record)?)?;
    Ok(ctx.record)
}
