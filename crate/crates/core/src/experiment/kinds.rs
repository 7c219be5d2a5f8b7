//! Experiment kinds behind one trait, registered by name.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::numerics::{log_log_fit, logspace};
use crate::pde::{compare_to_theory, solve_radial, solve_strip, strip_grid, PdeError, StripSolution};
use crate::placement::{place, Placement};
use crate::toda::resonance::match_resonances;
use crate::toda::{analytic_resonances, assemble_system, resonance_scan, solve_tilde_f, EigenRegistry, TodaSolution};

use super::criteria;
use super::seed::SeedField;
use super::{eps_dir, CriterionRecord, EpsResult, ExperimentError, FitSummary, RunConfig, RunContext};

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, config: &RunConfig, ctx: &mut RunContext) -> Result<(), ExperimentError>;
}

type Factory = fn() -> Box<dyn Experiment>;

pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Factory>,
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register("predict", || Box::new(Predict));
        r.register("solve-radial", || Box::new(SolveRadial));
        r.register("solve-strip", || Box::new(SolveStrip));
        r.register("toda-solve", || Box::new(TodaSolve));
        r.register("resonance-scan", || Box::new(ResonanceScanKind));
        r.register("verify", || Box::new(Verify));
        r
    }
}

impl ExperimentRegistry {
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn Experiment>, ExperimentError> {
        self.entries
            .get(name)
            .map(|f| f())
            .ok_or_else(|| ExperimentError::UnknownKind(name.to_string()))
    }
}

/// Fit of `values` ∝ ε^p over the successful ε of a sweep.
fn power_fit(name: &str, eps: &[f64], values: &[f64]) -> Option<FitSummary> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(e, v)| (*e, *v))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let fit = log_log_fit(&x, &y);
    let (lo, hi) = fit.slope_interval(0.95);
    Some(FitSummary {
        name: name.into(),
        exponent: fit.slope,
        ci_low: lo,
        ci_high: hi,
        level: 0.95,
        points: x.len(),
    })
}

fn failed(eps: f64, err: impl std::fmt::Display, seconds: f64) -> EpsResult {
    EpsResult {
        eps,
        ok: false,
        error: Some(err.to_string()),
        seconds,
        ..Default::default()
    }
}

fn placement_metrics(p: &Placement) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    let nodes = p.layers.nodes() as f64;
    for j in 0..p.n {
        let mean = p.predicted.iter().map(|q| q.f[j]).sum::<f64>() / nodes;
        m.insert(format!("f_{}_mean", j + 1), mean);
        if j > 0 {
            let s = p.predicted.iter().map(|q| q.spacings[j - 1]).sum::<f64>() / nodes;
            m.insert(format!("spacing_{}_mean", j + 1), s);
        }
    }
    m.insert("eps_star".into(), p.eps_star);
    m.insert("route_gap".into(), p.route_gap);
    m.insert("barf_residual".into(), p.barf_residual);
    m.insert("weight_deviation".into(), p.weight_deviation);
    m
}

pub struct Predict;

impl Experiment for Predict {
    fn name(&self) -> &'static str {
        "predict"
    }

    fn run(&self, cfg: &RunConfig, ctx: &mut RunContext) -> Result<(), ExperimentError> {
        let geo = cfg.build_geometry()?;
        let traces = geo.traces(cfg.nodes)?;
        let outcomes: Vec<(f64, Result<Placement, String>, f64)> = cfg
            .eps
            .par_iter()
            .map(|&eps| {
                let t = Instant::now();
                let p = place(&traces, cfg.n, eps, cfg.weight_mode()).map_err(|e| e.to_string());
                (eps, p, t.elapsed().as_secs_f64())
            })
            .collect();
        for (eps, p, seconds) in outcomes {
            match p {
                Ok(p) => {
                    ctx.write(&format!("{}/placement.csv", eps_dir(eps)), &p.to_csv())?;
                    ctx.record.results.push(EpsResult {
                        eps,
                        ok: true,
                        metrics: placement_metrics(&p),
                        seconds,
                        ..Default::default()
                    });
                }
                Err(e) => ctx.record.results.push(failed(eps, format!("placement: {e}"), seconds)),
            }
        }
        Ok(())
    }
}

pub struct SolveRadial;

impl Experiment for SolveRadial {
    fn name(&self) -> &'static str {
        "solve-radial"
    }

    fn run(&self, cfg: &RunConfig, ctx: &mut RunContext) -> Result<(), ExperimentError> {
        let v = cfg.radial_potential()?;
        let outcomes: Vec<_> = cfg
            .eps
            .par_iter()
            .map(|&eps| {
                let t = Instant::now();
                let s = solve_radial(cfg.n, eps, &v, &cfg.radial);
                (eps, s, t.elapsed().as_secs_f64())
            })
            .collect();
        let mut rel = Vec::new();
        let mut ok_eps = Vec::new();
        for (eps, sol, seconds) in outcomes {
            let dir = eps_dir(eps);
            match sol {
                Ok(s) => {
                    let mut csv = String::from("r,u\n");
                    for (r, u) in s.grid.r.iter().zip(&s.u) {
                        csv.push_str(&format!("{r:.15e},{u:.15e}\n"));
                    }
                    ctx.write(&format!("{dir}/solution.csv"), &csv)?;
                    let pred = [s.predicted.clone()];
                    ctx.write(&format!("{dir}/layers.csv"), &s.layers.to_csv(Some(&pred)))?;
                    ctx.write_trace(&format!("{dir}/newton.jsonl"), &s.trace)?;
                    let deltas = compare_to_theory(&s.layers, &pred);
                    let max_delta = deltas.iter().map(|d| d.delta.abs()).fold(0.0, f64::max);
                    let max_relative = deltas.iter().map(|d| d.relative.abs()).fold(0.0, f64::max);
                    let mut metrics = BTreeMap::new();
                    metrics.insert("residual_inf".into(), s.residual_inf);
                    metrics.insert("newton_steps".into(), s.trace.len() as f64);
                    metrics.insert("continuation".into(), f64::from(u8::from(s.continuation_used)));
                    for (j, d) in s.layers.depths[0].iter().enumerate() {
                        metrics.insert(format!("depth_{}", j + 1), *d);
                    }
                    rel.push(max_relative);
                    ok_eps.push(eps);
                    ctx.record.results.push(EpsResult {
                        eps,
                        ok: true,
                        error: None,
                        metrics,
                        max_delta: Some(max_delta),
                        max_relative: Some(max_relative),
                        seconds,
                    });
                }
                Err(e) => ctx.record.results.push(failed(eps, format!("pde: {e}"), seconds)),
            }
        }
        if let Some(f) = power_fit("relative depth error", &ok_eps, &rel) {
            ctx.record.fits.push(f);
        }
        Ok(())
    }
}

pub struct SolveStrip;

impl SolveStrip {
    fn record(ctx: &mut RunContext, cfg: &RunConfig, eps: f64, s: &StripSolution, seconds: f64) -> Result<EpsResult, ExperimentError> {
        let geo = cfg.build_geometry()?;
        let traces = geo.traces(cfg.strip.nz)?;
        let p = place(&traces, cfg.n, eps, cfg.weight_mode())?;
        let dir = eps_dir(eps);
        ctx.write(&format!("{dir}/solution.csv"), &s.field.to_csv())?;
        ctx.write(&format!("{dir}/layers.csv"), &s.layers.to_csv(Some(&p.predicted)))?;
        ctx.write_trace(&format!("{dir}/newton.jsonl"), &s.trace)?;
        let deltas = compare_to_theory(&s.layers, &p.predicted);
        let mut metrics = BTreeMap::new();
        metrics.insert("residual_inf".into(), s.residual_inf);
        metrics.insert("initial_residual_sup".into(), s.initial_residual.sup);
        metrics.insert("newton_steps".into(), s.trace.len() as f64);
        metrics.insert("band_excess".into(), s.band_excess);
        metrics.insert("far_defect".into(), s.far_defect);
        for j in 1..=cfg.n {
            metrics.insert(format!("spread_{j}"), s.layers.spread(j));
        }
        Ok(EpsResult {
            eps,
            ok: true,
            error: None,
            metrics,
            max_delta: Some(deltas.iter().map(|d| d.delta.abs()).fold(0.0, f64::max)),
            max_relative: Some(deltas.iter().map(|d| d.relative.abs()).fold(0.0, f64::max)),
            seconds,
        })
    }
}

impl Experiment for SolveStrip {
    fn name(&self) -> &'static str {
        "solve-strip"
    }

    /// ε in descending order; each solve starts cold from u₁ and falls back to
    /// the previous ε (or `--seed-from`) when Newton fails. An explicit seed is
    /// tried first.
    fn run(&self, cfg: &RunConfig, ctx: &mut RunContext) -> Result<(), ExperimentError> {
        let geo = cfg.build_geometry()?;
        let mut previous = match &ctx.seed_from {
            Some(dir) => Some(SeedField::load(dir)?),
            None => None,
        };
        let explicit = previous.is_some();
        let mut rel = Vec::new();
        let mut ok_eps = Vec::new();
        for (k, &eps) in cfg.eps.iter().enumerate() {
            let t = Instant::now();
            let (_, grid) = strip_grid(&geo, eps, &cfg.strip)?;
            let warm = previous.as_ref().map(|s| s.resample(&grid, eps));
            let attempt = |seed| solve_strip(&geo, cfg.n, eps, &cfg.strip, seed);
            let result = match warm {
                Some(w) if explicit && k == 0 => attempt(Some(w)).or_else(|_| attempt(None)),
                Some(w) => match attempt(None) {
                    Err(PdeError::Divergence { .. } | PdeError::BranchMismatch { .. }) => attempt(Some(w)),
                    other => other,
                },
                None => attempt(None),
            };
            let seconds = t.elapsed().as_secs_f64();
            match result {
                Ok(s) => {
                    let r = Self::record(ctx, cfg, eps, &s, seconds)?;
                    rel.push(r.max_relative.unwrap_or(f64::NAN));
                    ok_eps.push(eps);
                    ctx.record.results.push(r);
                    previous = Some(SeedField::from_field(&s.field, eps, cfg.n));
                }
                Err(e) => ctx.record.results.push(failed(eps, format!("pde: {e}"), seconds)),
            }
        }
        if let Some(f) = power_fit("relative depth error", &ok_eps, &rel) {
            ctx.record.fits.push(f);
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct TodaArtifact<'a> {
    eps: f64,
    forcing_mode: usize,
    forcing_amplitude: f64,
    homogeneous_sup: f64,
    solution: &'a TodaSolution,
}

pub struct TodaSolve;

impl Experiment for TodaSolve {
    fn name(&self) -> &'static str {
        "toda-solve"
    }

    /// f̃ for the synthetic forcing h_n = a·ε^{5/4}cos(2πmθ/ℓ) on every layer,
    /// plus the homogeneous solve.
    fn run(&self, cfg: &RunConfig, ctx: &mut RunContext) -> Result<(), ExperimentError> {
        let geo = cfg.build_geometry()?;
        let length = geo.curve.length();
        let traces = geo.traces(cfg.toda.nodes)?;
        let m = cfg.toda.nodes;
        let outcomes: Vec<_> = cfg
            .eps
            .par_iter()
            .map(|&eps| {
                let t = Instant::now();
                let out = (|| -> Result<(f64, TodaSolution), ExperimentError> {
                    let p = place(&traces, cfg.n, eps, cfg.weight_mode())?;
                    let delta = cfg.gamma_weighted.then_some(cfg.delta_tilde);
                    let sys = assemble_system(&p, length, delta)?;
                    let zero = vec![vec![0.0; m]; cfg.n];
                    let homogeneous = solve_tilde_f(&sys, &zero, cfg.threshold, cfg.toda.tol)?;
                    let row: Vec<f64> = (0..m)
                        .map(|i| {
                            cfg.toda.amplitude
                                * eps.powf(1.25)
                                * (2.0 * PI * cfg.toda.mode as f64 * i as f64 / m as f64).cos()
                        })
                        .collect();
                    let sol = solve_tilde_f(&sys, &vec![row; cfg.n], cfg.threshold, cfg.toda.tol)?;
                    Ok((homogeneous.sup_norm, sol))
                })();
                (eps, out, t.elapsed().as_secs_f64())
            })
            .collect();
        let mut c_values = Vec::new();
        for (eps, out, seconds) in outcomes {
            match out {
                Ok((homogeneous_sup, sol)) => {
                    let art = TodaArtifact {
                        eps,
                        forcing_mode: cfg.toda.mode,
                        forcing_amplitude: cfg.toda.amplitude,
                        homogeneous_sup,
                        solution: &sol,
                    };
                    ctx.write(&format!("{}/toda_solve.json", eps_dir(eps)), &serde_json::to_string_pretty(&art)?)?;
                    let mut metrics = BTreeMap::new();
                    metrics.insert("gap".into(), sol.gap);
                    metrics.insert("sup_norm".into(), sol.sup_norm);
                    metrics.insert("h_l2".into(), sol.h_l2);
                    metrics.insert("stability_constant".into(), sol.stability_constant);
                    metrics.insert("homogeneous_sup".into(), homogeneous_sup);
                    metrics.insert("newton_steps".into(), sol.residual_trace.len() as f64);
                    c_values.push(sol.stability_constant);
                    ctx.record.results.push(EpsResult {
                        eps,
                        ok: true,
                        metrics,
                        seconds,
                        ..Default::default()
                    });
                }
                Err(e) => ctx.record.results.push(failed(eps, e, seconds)),
            }
        }
        if !c_values.is_empty() {
            let hi = c_values.iter().copied().fold(0.0, f64::max);
            let lo = c_values.iter().copied().fold(f64::INFINITY, f64::min);
            if let Some(first) = ctx.record.results.iter_mut().find(|r| r.ok) {
                first.metrics.insert("stability_constant_spread".into(), hi / lo);
            }
        }
        Ok(())
    }
}

pub struct ResonanceScanKind;

impl Experiment for ResonanceScanKind {
    fn name(&self) -> &'static str {
        "resonance-scan"
    }

    fn run(&self, cfg: &RunConfig, ctx: &mut RunContext) -> Result<(), ExperimentError> {
        let t = Instant::now();
        let geo = cfg.build_geometry()?;
        let length = geo.curve.length();
        let traces = geo.traces(cfg.scan.nodes)?;
        // the coupling tables only use the ε-free offsets, so any admissible ε will do
        let p = place(&traces, cfg.n, cfg.scan.hi, cfg.weight_mode())?;
        let base = assemble_system(&p, length, cfg.gamma_weighted.then_some(cfg.delta_tilde))?;
        let strategy = EigenRegistry::default().create(&cfg.scan.strategy)?;
        let grid = logspace(cfg.scan.lo, cfg.scan.hi, cfg.scan.points);
        let scan = resonance_scan(&base, &grid, strategy.as_ref(), cfg.threshold)?;
        // analytic resonances need ρ_n constant in θ
        let rho = base.rho_table();
        let constant = rho.iter().all(|r| {
            let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            hi - lo < 1e-9 * hi.abs().max(1.0)
        });
        let mut analytic = Vec::new();
        if constant {
            for r in &rho {
                analytic.extend(
                    analytic_resonances(r[0], length, base.gamma0, cfg.scan.lo, cfg.scan.hi)
                        .into_iter()
                        .map(|(_, e)| e),
                );
            }
            analytic.sort_by(f64::total_cmp);
        }
        ctx.write("resonance.csv", &scan.to_csv(&analytic))?;
        let mut metrics = BTreeMap::new();
        metrics.insert("points".into(), scan.eps.len() as f64);
        metrics.insert("minima".into(), scan.minima.len() as f64);
        metrics.insert("resonant_points".into(), scan.resonant.iter().filter(|r| **r).count() as f64);
        metrics.insert("min_gap".into(), scan.gap.iter().copied().fold(f64::INFINITY, f64::min));
        if constant {
            let matched = match_resonances(&scan, &analytic);
            metrics.insert("analytic_resonances".into(), analytic.len() as f64);
            metrics.insert("worst_minimum_offset".into(), matched.worst_minimum_offset);
            metrics.insert("resolvable".into(), matched.resolvable as f64);
            metrics.insert("missed".into(), matched.missed.len() as f64);
            ctx.write("resonance_match.json", &serde_json::to_string_pretty(&matched)?)?;
        }
        ctx.record.results.push(EpsResult {
            eps: cfg.scan.hi,
            ok: true,
            metrics,
            seconds: t.elapsed().as_secs_f64(),
            ..Default::default()
        });
        Ok(())
    }
}

pub struct Verify;

impl Experiment for Verify {
    fn name(&self) -> &'static str {
        "verify"
    }

    fn run(&self, cfg: &RunConfig, ctx: &mut RunContext) -> Result<(), ExperimentError> {
        let ids: Vec<u32> = if cfg.criteria.is_empty() {
            criteria::ALL.to_vec()
        } else {
            cfg.criteria.clone()
        };
        let outcomes = criteria::evaluate_all(&ids);
        let mut lines = String::new();
        for o in &outcomes {
            lines.push_str(&o.line());
            lines.push('\n');
        }
        ctx.write("acceptance.txt", &lines)?;
        ctx.record.criteria = outcomes.iter().map(CriterionRecord::from).collect();
        Ok(())
    }
}
