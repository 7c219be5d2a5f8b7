use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layercluster::experiment::{emit_report, run_experiment, ExperimentError, ExperimentKind, RunConfig, RunRecord};

#[derive(Parser)]
#[command(name = "layercluster", version, about = "Clustered boundary layers: placement, reduced system and PDE runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted layer depths and spacings (placement.csv).
    Predict(RunArgs),
    /// Damped Newton on the unit disk (radial symmetry).
    SolveRadial(RunArgs),
    /// Damped Newton on the boundary strip in Fermi coordinates.
    SolveStrip(RunArgs),
    /// Reduced-system solve for f̃ with synthetic forcing.
    TodaSolve(RunArgs),
    /// Spectral-gap scan over ε (resonance.csv).
    ResonanceScan(RunArgs),
    /// Acceptance criteria; exits non-zero when any fails.
    Verify(RunArgs),
    /// Summarize finished runs into summary.md and summary.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config; its `kind` is replaced by the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Previous solve-strip run directory to warm-start from.
    #[arg(long)]
    seed_from: Option<PathBuf>,
    /// Layer count when no config is given.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Comma-separated ε values when no config is given.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Criterion ids for verify when no config is given.
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<u32>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories containing record.json.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Where summary.md and summary.json go.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn load_config(kind: ExperimentKind, args: &RunArgs) -> Result<RunConfig, ExperimentError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut cfg = RunConfig::parse(&text)?;
            cfg.kind = kind;
            cfg
        }
        None => {
            let mut eps = args.eps.clone();
            if eps.is_empty() && !matches!(kind, ExperimentKind::Verify | ExperimentKind::ResonanceScan) {
                eps.push(0.01);
            }
            let mut cfg = RunConfig::new(kind, args.n, eps);
            cfg.criteria = args.criteria.clone();
            cfg
        }
    };
    if let Some(out) = &args.out {
        cfg.out = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<RunRecord, ExperimentError> {
    let cfg = load_config(kind, args)?;
    let record = run_experiment(&cfg, args.seed_from.as_deref())?;
    let report = emit_report(std::slice::from_ref(&record));
    report.write(std::path::Path::new(&record.run_dir))?;
    Ok(record)
}

fn print_record(record: &RunRecord) {
    println!("{} → {}", record.kind, record.run_dir);
    for r in &record.results {
        match &r.error {
            Some(e) => println!("  ε = {:.4e}: FAILED ({e})", r.eps),
            None => {
                let shown: Vec<String> = r.metrics.iter().take(6).map(|(k, v)| format!("{k} = {v:.6}")).collect();
                println!("  ε = {:.4e}: {}", r.eps, shown.join(", "));
            }
        }
    }
    for c in &record.criteria {
        println!("  criterion {} ({}): {}", c.id, c.title, if c.passed { "PASS" } else { "FAIL" });
        for (name, measured, required, ok) in &c.checks {
            if !ok {
                println!("    {name}: measured {measured:.6e}, required {required}");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Predict(a) => (ExperimentKind::Predict, a),
        Command::SolveRadial(a) => (ExperimentKind::SolveRadial, a),
        Command::SolveStrip(a) => (ExperimentKind::SolveStrip, a),
        Command::TodaSolve(a) => (ExperimentKind::TodaSolve, a),
        Command::ResonanceScan(a) => (ExperimentKind::ResonanceScan, a),
        Command::Verify(a) => (ExperimentKind::Verify, a),
        Command::Report(r) => {
            let records: Result<Vec<RunRecord>, _> = r.runs.iter().map(|d| RunRecord::load(d)).collect();
            return match records.and_then(|recs| {
                let report = emit_report(&recs);
                report.write(&r.out)?;
                Ok(report)
            }) {
                Ok(report) => {
                    println!("summary written to {}", r.out.join("summary.md").display());
                    if report.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    if let Some(jobs) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(kind, args) {
        Ok(record) => {
            print_record(&record);
            if record.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
