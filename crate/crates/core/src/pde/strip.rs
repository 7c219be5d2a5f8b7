//! Nonlinear strip problem on (0, s_max) × [0, ℓ/ε): the stretched Allen-Cahn
//! operator in Fermi coordinates with Neumann data at s = 0, u = (−1)^N at
//! s_max and periodicity in z.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryTraces, FermiChart, Geometry};
use crate::numerics::{gmres, norm2, norm_inf, GmresOptions};
use crate::placement::Placement;
use crate::profile::nonlinearity;

use super::ansatz::{build_u1, far_value};
use super::grid::{CollarField, StripGrid};
use super::layers::{extract_layers, LayerTrace};
use super::precond::{PreconditionerRegistry, SetupContext};
use super::{NewtonStep, PdeError};

/// Which local operator the residual uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorForm {
    /// Full metric coefficients 1/(1 − εks) and V(εs, εz).
    #[default]
    Exact,
    /// u_ss + u_zz + V(0,εz)F + B₃ + B₄: curvature and potential expanded to
    /// second order, metric cross terms dropped.
    Truncated,
}

/// Discrete strip operator with precomputed per-node coefficients.
#[derive(Debug, Clone)]
pub struct StripProblem {
    pub grid: StripGrid,
    pub eps: f64,
    pub n: usize,
    pub form: OperatorForm,
    far: f64,
    // coefficients of u_s, u_zz, u_z and F(u) at each node
    a_s: Vec<f64>,
    a_zz: Vec<f64>,
    a_z: Vec<f64>,
    pot: Vec<f64>,
}

/// Jacobian in line storage: s-couplings `lower`/`upper`, z-couplings `zm`/`zp`.
#[derive(Debug, Clone)]
pub struct StripJacobian {
    pub grid: StripGrid,
    pub diag: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub zm: Vec<f64>,
    pub zp: Vec<f64>,
}

impl StripJacobian {
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (ns, nz) = (self.grid.ns, self.grid.nz);
        out.par_chunks_mut(ns).enumerate().for_each(|(m, row)| {
            let mp = (m + 1) % nz;
            let mm = (m + nz - 1) % nz;
            for i in 0..ns {
                let k = m * ns + i;
                let mut a = self.diag[k] * v[k] + self.zm[k] * v[mm * ns + i] + self.zp[k] * v[mp * ns + i];
                if i > 0 {
                    a += self.lower[k] * v[k - 1];
                }
                if i + 1 < ns {
                    a += self.upper[k] * v[k + 1];
                }
                row[i] = a;
            }
        });
    }
}

/// Sup and L² norms of a residual, with the sup restricted to each layer window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub sup: f64,
    /// Grid L² norm (√(Σ r² h_s h_z)).
    pub l2: f64,
    /// Sup over the window [mid(f_{j−1}, f_j), mid(f_j, f_{j+1})) of each layer.
    pub per_layer: Vec<f64>,
}

impl StripProblem {
    /// Builds the operator on `grid` for `geometry` at ε. The grid lines must
    /// coincide with the trace nodes θ_m = mℓ/nz.
    pub fn new(geometry: &Geometry, n: usize, eps: f64, grid: StripGrid, form: OperatorForm) -> Result<Self, PdeError> {
        let traces = geometry.traces(grid.nz)?;
        let (ns, nz) = (grid.ns, grid.nz);
        if (grid.z_period * eps - traces.length).abs() > 1e-9 * traces.length {
            return Err(PdeError::InvalidGrid(format!(
                "strip period {} does not match ℓ/ε = {}",
                grid.z_period,
                traces.length / eps
            )));
        }
        let mut a_s = vec![0.0; grid.len()];
        let mut a_zz = vec![1.0; grid.len()];
        let mut a_z = vec![0.0; grid.len()];
        let mut pot = vec![0.0; grid.len()];
        let curve = &geometry.curve;
        let potential = &geometry.potential;
        pot.par_chunks_mut(ns).enumerate().for_each(|(m, row)| {
            let theta = traces.theta[m];
            for (i, v) in row.iter_mut().enumerate() {
                *v = match form {
                    OperatorForm::Exact => potential.collar_value(curve, eps * grid.s(i), theta),
                    OperatorForm::Truncated => {
                        let s = grid.s(i);
                        traces.beta[m].powi(2) + eps * s * traces.beta1[m] + 0.5 * eps * eps * s * s * traces.beta2[m]
                    }
                };
            }
        });
        for m in 0..nz {
            let (k, dk) = (traces.k[m], traces.dk[m]);
            for i in 0..ns {
                let s = grid.s(i);
                let idx = grid.index(i, m);
                match form {
                    OperatorForm::Exact => {
                        let q = 1.0 - eps * k * s;
                        a_s[idx] = -eps * k / q;
                        a_zz[idx] = 1.0 / (q * q);
                        a_z[idx] = eps * eps * s * dk / (q * q * q);
                    }
                    OperatorForm::Truncated => {
                        a_s[idx] = -(eps * k + eps * eps * s * k * k);
                    }
                }
            }
        }
        Ok(Self {
            grid,
            eps,
            n,
            form,
            far: far_value(n),
            a_s,
            a_zz,
            a_z,
            pot,
        })
    }

    /// The Dirichlet value at s_max.
    pub fn far(&self) -> f64 {
        self.far
    }

    /// S(u) at every unknown.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (ns, nz) = (g.ns, g.nz);
        let (ihs2, ihs, ihz2, ihz) = (1.0 / (g.hs * g.hs), 0.5 / g.hs, 1.0 / (g.hz * g.hz), 0.5 / g.hz);
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(ns).enumerate().for_each(|(m, row)| {
            let mp = (m + 1) % nz;
            let mm = (m + nz - 1) % nz;
            for i in 0..ns {
                let k = m * ns + i;
                let c = u[k];
                // ghost node u_{−1} = u_1 keeps the discrete Neumann condition exact
                let down = if i > 0 { u[k - 1] } else { u[k + 1] };
                let up = if i + 1 < ns { u[k + 1] } else { self.far };
                let (zp, zm) = (u[mp * ns + i], u[mm * ns + i]);
                row[i] = (up - 2.0 * c + down) * ihs2
                    + self.a_s[k] * (up - down) * ihs
                    + self.a_zz[k] * (zp - 2.0 * c + zm) * ihz2
                    + self.a_z[k] * (zp - zm) * ihz
                    + self.pot[k] * nonlinearity(c);
            }
        });
        out
    }

    pub fn jacobian(&self, u: &[f64]) -> StripJacobian {
        let g = self.grid;
        let ns = g.ns;
        let (ihs2, ihs, ihz2, ihz) = (1.0 / (g.hs * g.hs), 0.5 / g.hs, 1.0 / (g.hz * g.hz), 0.5 / g.hz);
        let len = g.len();
        let mut jac = StripJacobian {
            grid: g,
            diag: vec![0.0; len],
            lower: vec![0.0; len],
            upper: vec![0.0; len],
            zm: vec![0.0; len],
            zp: vec![0.0; len],
        };
        for k in 0..len {
            let i = k % ns;
            let (a_s, a_zz, a_z) = (self.a_s[k], self.a_zz[k], self.a_z[k]);
            jac.diag[k] = -2.0 * ihs2 - 2.0 * a_zz * ihz2 + self.pot[k] * (1.0 - 3.0 * u[k] * u[k]);
            if i == 0 {
                jac.upper[k] = 2.0 * ihs2;
            } else {
                jac.lower[k] = ihs2 - a_s * ihs;
                if i + 1 < ns {
                    jac.upper[k] = ihs2 + a_s * ihs;
                }
            }
            jac.zp[k] = a_zz * ihz2 + a_z * ihz;
            jac.zm[k] = a_zz * ihz2 - a_z * ihz;
        }
        jac
    }

    /// Residual norms with per-layer windows from `depths[line]`.
    pub fn norms(&self, r: &[f64], depths: &[Vec<f64>]) -> ResidualNorms {
        let g = self.grid;
        let sup = norm_inf(r);
        let l2 = norm2(r) * (g.hs * g.hz).sqrt();
        let nlayers = depths.iter().map(|d| d.len()).max().unwrap_or(0);
        let mut per_layer = vec![0.0f64; nlayers];
        for m in 0..g.nz {
            let d = &depths[m.min(depths.len().saturating_sub(1))];
            for i in 0..g.ns {
                let s = g.s(i);
                let j = d.iter().enumerate().position(|(j, &f)| {
                    let lo = if j == 0 { 0.0 } else { 0.5 * (d[j - 1] + f) };
                    let hi = d.get(j + 1).map_or(f64::INFINITY, |&n| 0.5 * (f + n));
                    s >= lo && s < hi
                });
                if let Some(j) = j {
                    per_layer[j] = per_layer[j].max(r[g.index(i, m)].abs());
                }
            }
        }
        ResidualNorms { sup, l2, per_layer }
    }
}

/// S(u) and its norms on the strip.
pub fn residual_strip(problem: &StripProblem, u: &CollarField, depths: &[Vec<f64>]) -> (CollarField, ResidualNorms) {
    let r = problem.residual(&u.values);
    let norms = problem.norms(&r, depths);
    (CollarField { grid: u.grid, values: r }, norms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripOptions {
    pub ns: usize,
    pub nz: usize,
    /// Collar half-width; `None` uses 0.4/max|k|.
    pub delta0: Option<f64>,
    pub form: OperatorForm,
    pub preconditioner: String,
    pub use_phi11: bool,
    pub tol: f64,
    pub max_newton: usize,
    pub gmres_tol: f64,
}

impl Default for StripOptions {
    fn default() -> Self {
        Self {
            ns: 512,
            nz: 256,
            delta0: None,
            form: OperatorForm::Exact,
            preconditioner: "two-level-zebra".into(),
            use_phi11: false,
            tol: 1e-8,
            max_newton: 40,
            gmres_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StripSolution {
    pub field: CollarField,
    pub layers: LayerTrace,
    pub trace: Vec<NewtonStep>,
    pub residual_inf: f64,
    /// max |u| − 1 (positive values breach the maximum principle band).
    pub band_excess: f64,
    /// max |u − (−1)^N| on the last line before the Dirichlet edge.
    pub far_defect: f64,
    pub initial_residual: ResidualNorms,
}

/// Strip grid for `geometry` at ε with the chart's collar width.
pub fn strip_grid(geometry: &Geometry, eps: f64, opts: &StripOptions) -> Result<(FermiChart, StripGrid), PdeError> {
    let chart = FermiChart::new(geometry.curve.clone(), opts.delta0, eps)?;
    let grid = StripGrid::new(opts.ns, opts.nz, chart.s_max(), chart.z_period())?;
    Ok((chart, grid))
}

/// Newton on the strip from `initial`.
pub fn newton_strip(
    problem: &StripProblem,
    initial: CollarField,
    windows: &[Vec<f64>],
    opts: &StripOptions,
) -> Result<(CollarField, Vec<NewtonStep>), PdeError> {
    let registry = PreconditionerRegistry::default();
    let mut pc = registry.create(&opts.preconditioner)?;
    let mut u = initial;
    let mut trace = Vec::new();
    let mut r = problem.residual(&u.values);
    let mut last_linear = (0usize, 0.0f64);
    let mut damping = 0.0;
    for it in 0..=opts.max_newton {
        let r_inf = norm_inf(&r);
        let r_l2 = norm2(&r);
        trace.push(NewtonStep {
            iteration: it,
            eps: problem.eps,
            residual_inf: r_inf,
            residual_l2: r_l2,
            damping,
            linear_iterations: last_linear.0,
            linear_residual: last_linear.1,
        });
        if r_inf < opts.tol {
            return Ok((u, trace));
        }
        if it == opts.max_newton || !r_inf.is_finite() {
            break;
        }
        let jac = problem.jacobian(&u.values);
        pc.setup(
            &jac,
            &SetupContext {
                u: &u.values,
                windows,
            },
        )?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut delta = vec![0.0; rhs.len()];
        let out = gmres(
            |v, o| jac.apply(v, o),
            |v, o| pc.apply(v, o),
            &rhs,
            &mut delta,
            GmresOptions {
                rel_tol: opts.gmres_tol,
                restart: 60,
                max_iter: 1200,
            },
        );
        last_linear = (out.iterations, out.rel_residual);
        if !out.converged && out.rel_residual > 1e-6 {
            return Err(PdeError::LinearSolve(format!(
                "GMRES stalled at relative residual {:.3e} after {} iterations",
                out.rel_residual, out.iterations
            )));
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1.0 / 4096.0 {
            let trial: Vec<f64> = u.values.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let rt = problem.residual(&trial);
            if norm2(&rt) <= (1.0 - 1e-4 * lambda) * r_l2 {
                u.values = trial;
                r = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        damping = lambda;
    }
    Err(PdeError::Divergence { trace })
}

/// Solves the strip problem seeded by u₁ (plus ε|ln ε|φ₁₁ when requested), or by
/// `seed` when given.
pub fn solve_strip(
    geometry: &Geometry,
    n: usize,
    eps: f64,
    opts: &StripOptions,
    seed: Option<CollarField>,
) -> Result<StripSolution, PdeError> {
    let (_, grid) = strip_grid(geometry, eps, opts)?;
    let traces = geometry.traces(grid.nz)?;
    let placement = crate::placement::place(&traces, n, eps, Default::default())?;
    let problem = StripProblem::new(geometry, n, eps, grid, opts.form)?;
    let windows: Vec<Vec<f64>> = (0..grid.nz).map(|m| placement.layers.at(m)).collect();
    let initial = match seed {
        Some(f) if f.grid == grid => f,
        Some(_) => return Err(PdeError::InvalidGrid("seed field was computed on a different grid".into())),
        None => initial_guess(&grid, &placement, &traces, opts.use_phi11)?,
    };
    let initial_residual = problem.norms(&problem.residual(&initial.values), &windows);
    let (field, trace) = newton_strip(&problem, initial, &windows, opts)?;
    let layers = extract_layers(&field, eps, problem.far());
    let found = layers.modal_count();
    if layers.count() != Some(n) {
        return Err(PdeError::BranchMismatch { expected: n, found, trace });
    }
    let band_excess = field.values.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.abs())) - 1.0;
    let far_defect = (0..grid.nz)
        .map(|m| (field.at(grid.ns - 1, m) - problem.far()).abs())
        .fold(0.0, f64::max);
    Ok(StripSolution {
        residual_inf: trace.last().map_or(f64::NAN, |s| s.residual_inf),
        field,
        layers,
        trace,
        band_excess,
        far_defect,
        initial_residual,
    })
}

/// u₁, optionally corrected by ε|ln ε|φ₁₁ (`build_phi11` carries the full prefactor).
pub fn initial_guess(grid: &StripGrid, placement: &Placement, traces: &BoundaryTraces, phi11: bool) -> Result<CollarField, PdeError> {
    let mut u = build_u1(grid, placement)?;
    if phi11 {
        let corr = crate::strip_linear::build_phi11(grid, placement, traces)
            .map_err(|e| PdeError::InvalidGrid(e.to_string()))?;
        u.values.iter_mut().zip(&corr.values).for_each(|(a, c)| *a += c);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryCurve, ConstantPotential};
    use std::sync::Arc;

    fn circle_problem(form: OperatorForm, ns: usize, nz: usize, eps: f64) -> (Geometry, StripProblem) {
        let geo = Geometry::new(
            Arc::new(BoundaryCurve::circle(1.0, 256).unwrap()),
            Arc::new(ConstantPotential(1.0)),
        );
        let opts = StripOptions {
            ns,
            nz,
            ..Default::default()
        };
        let (_, grid) = strip_grid(&geo, eps, &opts).unwrap();
        let p = StripProblem::new(&geo, 1, eps, grid, form).unwrap();
        (geo, p)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (_, p) = circle_problem(OperatorForm::Exact, 60, 6, 0.05);
        let u: Vec<f64> = (0..p.grid.len())
            .map(|k| (0.3 * k as f64).sin() * 0.9)
            .collect();
        let jac = p.jacobian(&u);
        let v: Vec<f64> = (0..u.len()).map(|k| (0.7 * k as f64).cos()).collect();
        let mut jv = vec![0.0; u.len()];
        jac.apply(&v, &mut jv);
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let (rp, rm) = (p.residual(&up), p.residual(&um));
        for k in 0..u.len() {
            let fd = (rp[k] - rm[k]) / (2.0 * h);
            assert!((fd - jv[k]).abs() < 1e-5 * (1.0 + fd.abs()), "k={k}: {fd} vs {}", jv[k]);
        }
    }

    #[test]
    fn forms_agree_to_second_order_near_the_boundary() {
        let (_, exact) = circle_problem(OperatorForm::Exact, 300, 4, 0.01);
        let (_, trunc) = circle_problem(OperatorForm::Truncated, 300, 4, 0.01);
        // difference of the u_s coefficients is O(ε³s²)
        for i in [0usize, 10, 50] {
            let s = exact.grid.s(i);
            let d = (exact.a_s[i] - trunc.a_s[i]).abs();
            assert!(d <= 2.0 * 0.01f64.powi(3) * s * s + 1e-15, "i={i}: {d}");
        }
    }
}
