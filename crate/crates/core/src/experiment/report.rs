//! Markdown and JSON summaries over run records.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ExperimentError, FitSummary, RunRecord};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionLine {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    /// Failing checks as "name: measured vs required".
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunLine {
    pub kind: String,
    pub config_hash: String,
    pub run_dir: String,
    pub passed: bool,
    pub eps: Vec<f64>,
    pub errors: Vec<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub passed: bool,
    pub runs: Vec<RunLine>,
    pub criteria: Vec<CriterionLine>,
    pub fits: Vec<FitSummary>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub markdown: String,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `summary.md` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.md"), &self.markdown)?;
        fs::write(dir.join("summary.json"), self.to_json())?;
        Ok(())
    }
}

fn not_run(md: &mut String) {
    md.push_str("not run\n\n");
}

pub fn emit_report(records: &[RunRecord]) -> Report {
    let mut criteria = Vec::new();
    for r in records {
        for c in &r.criteria {
            let mut failures: Vec<String> = c
                .checks
                .iter()
                .filter(|k| !k.3)
                .map(|k| format!("{}: measured {:.6e}, required {}", k.0, k.1, k.2))
                .collect();
            if let Some(e) = &c.error {
                failures.push(format!("error: {e}"));
            }
            criteria.push(CriterionLine {
                id: c.id,
                title: c.title.clone(),
                passed: c.passed,
                failures,
            });
        }
    }
    let runs: Vec<RunLine> = records
        .iter()
        .map(|r| RunLine {
            kind: r.kind.clone(),
            config_hash: r.config_hash.clone(),
            run_dir: r.run_dir.clone(),
            passed: r.passed(),
            eps: r.results.iter().map(|x| x.eps).collect(),
            errors: r
                .results
                .iter()
                .filter_map(|x| x.error.as_ref().map(|e| format!("ε = {:.4e}: {e}", x.eps)))
                .collect(),
            seconds: r.seconds,
        })
        .collect();
    let fits: Vec<FitSummary> = records.iter().flat_map(|r| r.fits.clone()).collect();
    let artifacts: Vec<String> = records
        .iter()
        .flat_map(|r| r.artifacts.iter().map(move |a| format!("{}/{a}", r.run_dir)))
        .collect();
    let passed = !records.is_empty() && records.iter().all(RunRecord::passed);

    let mut md = String::from("# Run summary\n\n");
    let _ = writeln!(md, "{} run(s), overall: **{}**\n", records.len(), if passed { "PASS" } else { "FAIL" });

    md.push_str("## Acceptance\n\n");
    if criteria.is_empty() {
        not_run(&mut md);
    } else {
        md.push_str("| id | criterion | result | details |\n|---|---|---|---|\n");
        for c in &criteria {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                c.id,
                c.title,
                if c.passed { "PASS" } else { "FAIL" },
                c.failures.join("<br>")
            );
        }
        md.push('\n');
    }

    md.push_str("## Runs\n\n| kind | hash | ε | result | seconds |\n|---|---|---|---|---|\n");
    for r in &runs {
        let eps: Vec<String> = r.eps.iter().map(|e| format!("{e:.3e}")).collect();
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.2} |",
            r.kind,
            &r.config_hash[..12.min(r.config_hash.len())],
            eps.join(", "),
            if r.passed { "PASS" } else { "FAIL" },
            r.seconds
        );
    }
    md.push('\n');
    let errors: Vec<&String> = runs.iter().flat_map(|r| &r.errors).collect();
    if !errors.is_empty() {
        md.push_str("Failures:\n\n");
        for e in errors {
            let _ = writeln!(md, "- {e}");
        }
        md.push('\n');
    }

    md.push_str("## Placement\n\n");
    let placed: Vec<&RunRecord> = records.iter().filter(|r| r.kind == "predict").collect();
    if placed.is_empty() {
        not_run(&mut md);
    } else {
        for r in placed {
            for x in r.results.iter().filter(|x| x.ok) {
                let metrics: Vec<String> = x.metrics.iter().map(|(k, v)| format!("{k} = {v:.6}")).collect();
                let _ = writeln!(md, "- ε = {:.4e}: {}", x.eps, metrics.join(", "));
            }
        }
        md.push('\n');
    }

    md.push_str("## PDE deltas\n\n");
    let deltas: Vec<(&RunRecord, f64, f64, f64)> = records
        .iter()
        .flat_map(|r| {
            r.results
                .iter()
                .filter_map(move |x| Some((r, x.eps, x.max_delta?, x.max_relative?)))
        })
        .collect();
    if deltas.is_empty() {
        not_run(&mut md);
    } else {
        md.push_str("| kind | ε | max abs delta | max rel delta |\n|---|---|---|---|\n");
        for (r, e, d, rel) in deltas {
            let _ = writeln!(md, "| {} | {e:.4e} | {d:.4e} | {rel:.4e} |", r.kind);
        }
        md.push('\n');
    }

    md.push_str("## Reduced system\n\n");
    let toda: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.kind == "toda-solve" || r.kind == "resonance-scan")
        .collect();
    if toda.is_empty() {
        not_run(&mut md);
    } else {
        for r in toda {
            for x in r.results.iter().filter(|x| x.ok) {
                let metrics: Vec<String> = x.metrics.iter().map(|(k, v)| format!("{k} = {v:.4e}")).collect();
                let _ = writeln!(md, "- {} ε = {:.4e}: {}", r.kind, x.eps, metrics.join(", "));
            }
        }
        md.push('\n');
    }

    md.push_str("## Convergence fits\n\n");
    if fits.is_empty() {
        not_run(&mut md);
    } else {
        for f in &fits {
            let _ = writeln!(
                md,
                "- {}: exponent {:.4} ({:.0}% CI [{:.4}, {:.4}], {} points)",
                f.name,
                f.exponent,
                100.0 * f.level,
                f.ci_low,
                f.ci_high,
                f.points
            );
        }
        md.push('\n');
    }

    md.push_str("## Artifacts\n\n");
    for a in &artifacts {
        let _ = writeln!(md, "- [{a}]({a})");
    }

    Report {
        passed,
        runs,
        criteria,
        fits,
        artifacts,
        markdown: md,
    }
}
