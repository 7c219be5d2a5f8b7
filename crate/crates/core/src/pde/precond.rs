//! Preconditioners for the strip Jacobian, selected by name.
//!
//! Every normal line is a tridiagonal system in s. Line smoothers invert those
//! exactly; the two-level variant adds a coarse space spanned by the layer
//! translation modes u_s, which carry the small eigenvalues of the clustered
//! configuration.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::numerics::{BlockTridiagonal, CyclicBlockTridiagonal, TridiagonalFactor};

use super::strip::StripJacobian;
use super::PdeError;

/// Data available when a preconditioner is rebuilt.
pub struct SetupContext<'a> {
    /// Current Newton iterate.
    pub u: &'a [f64],
    /// Layer depths per line that delimit the coarse windows.
    pub windows: &'a [Vec<f64>],
}

pub trait Preconditioner: Send + Sync {
    fn name(&self) -> &'static str;
    fn setup(&mut self, jac: &StripJacobian, ctx: &SetupContext) -> Result<(), PdeError>;
    fn apply(&self, r: &[f64], out: &mut [f64]);
}

type Factory = fn() -> Box<dyn Preconditioner>;

/// Name → constructor table.
pub struct PreconditionerRegistry {
    entries: BTreeMap<&'static str, Factory>,
}

impl Default for PreconditionerRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register("line-jacobi", || Box::new(LineJacobi::default()));
        r.register("zebra", || Box::new(Zebra::default()));
        r.register("two-level-zebra", || Box::new(TwoLevelZebra::default()));
        r
    }
}

impl PreconditionerRegistry {
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn Preconditioner>, PdeError> {
        self.entries
            .get(name)
            .map(|f| f())
            .ok_or_else(|| PdeError::UnknownPreconditioner(name.to_string()))
    }
}

fn line_factors(jac: &StripJacobian) -> Vec<TridiagonalFactor> {
    let ns = jac.grid.ns;
    (0..jac.grid.nz)
        .into_par_iter()
        .map(|m| {
            let r = m * ns..(m + 1) * ns;
            TridiagonalFactor::new(&jac.lower[r.clone()], &jac.diag[r.clone()], &jac.upper[r])
        })
        .collect()
}

/// Exact solves on every normal line, z-couplings ignored.
#[derive(Default)]
pub struct LineJacobi {
    lines: Vec<TridiagonalFactor>,
}

impl Preconditioner for LineJacobi {
    fn name(&self) -> &'static str {
        "line-jacobi"
    }

    fn setup(&mut self, jac: &StripJacobian, _ctx: &SetupContext) -> Result<(), PdeError> {
        self.lines = line_factors(jac);
        Ok(())
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        let ns = self.lines[0].len();
        out.copy_from_slice(r);
        out.par_chunks_mut(ns)
            .zip(self.lines.par_iter())
            .for_each(|(row, f)| f.solve_in_place(row));
    }
}

/// One red-black line Gauss-Seidel sweep: even lines first, then odd lines with
/// the updated neighbours.
#[derive(Default)]
pub struct Zebra {
    lines: Vec<TridiagonalFactor>,
    jac: Option<StripJacobian>,
}

impl Zebra {
    fn sweep(&self, r: &[f64], out: &mut [f64]) {
        let jac = self.jac.as_ref().expect("setup before apply");
        let (ns, nz) = (jac.grid.ns, jac.grid.nz);
        out.iter_mut().for_each(|v| *v = 0.0);
        for parity in 0..2 {
            let snapshot = out.to_vec();
            out.par_chunks_mut(ns).enumerate().for_each(|(m, row)| {
                // with nz odd the last line is even and neighbours line 0; it is
                // relaxed with the odd lines
                let colour = if m == nz - 1 && nz % 2 == 1 { 1 } else { m % 2 };
                if colour != parity {
                    return;
                }
                let mp = (m + 1) % nz;
                let mm = (m + nz - 1) % nz;
                for i in 0..ns {
                    let k = m * ns + i;
                    row[i] = r[k] - jac.zm[k] * snapshot[mm * ns + i] - jac.zp[k] * snapshot[mp * ns + i];
                }
                self.lines[m].solve_in_place(row);
            });
        }
    }
}

impl Preconditioner for Zebra {
    fn name(&self) -> &'static str {
        "zebra"
    }

    fn setup(&mut self, jac: &StripJacobian, _ctx: &SetupContext) -> Result<(), PdeError> {
        self.lines = line_factors(jac);
        self.jac = Some(jac.clone());
        Ok(())
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        self.sweep(r, out);
    }
}

/// Zebra smoothing wrapped by an exact Galerkin solve on the layer translation
/// modes: coarse, smooth, coarse.
#[derive(Default)]
pub struct TwoLevelZebra {
    smoother: Zebra,
    /// `basis[m][j]`: (first index, values) of φ_{j,m} on line m.
    basis: Vec<Vec<(usize, Vec<f64>)>>,
    layers: usize,
    coarse: Option<crate::numerics::block::CyclicBlockLu>,
}

impl TwoLevelZebra {
    fn restrict(&self, r: &[f64], ns: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.basis.len() * self.layers];
        for (m, line) in self.basis.iter().enumerate() {
            for (j, (start, phi)) in line.iter().enumerate() {
                let base = m * ns + start;
                c[m * self.layers + j] = phi.iter().enumerate().map(|(a, p)| p * r[base + a]).sum();
            }
        }
        c
    }

    fn prolong_add(&self, c: &[f64], out: &mut [f64], ns: usize) {
        for (m, line) in self.basis.iter().enumerate() {
            for (j, (start, phi)) in line.iter().enumerate() {
                let w = c[m * self.layers + j];
                let base = m * ns + start;
                phi.iter().enumerate().for_each(|(a, p)| out[base + a] += w * p);
            }
        }
    }

    fn coarse_correct(&self, r: &[f64], out: &mut [f64], ns: usize) {
        if let Some(lu) = &self.coarse {
            let mut c = self.restrict(r, ns);
            lu.solve_in_place(&mut c);
            self.prolong_add(&c, out, ns);
        }
    }
}

impl Preconditioner for TwoLevelZebra {
    fn name(&self) -> &'static str {
        "two-level-zebra"
    }

    fn setup(&mut self, jac: &StripJacobian, ctx: &SetupContext) -> Result<(), PdeError> {
        self.smoother.setup(jac, ctx)?;
        let g = jac.grid;
        let (ns, nz) = (g.ns, g.nz);
        let layers = ctx.windows.iter().map(|w| w.len()).min().unwrap_or(0);
        self.layers = layers;
        self.coarse = None;
        self.basis.clear();
        if layers == 0 {
            return Ok(());
        }
        // φ_{j,m} = u_s on the window of layer j, normalized
        for m in 0..nz {
            let d = &ctx.windows[m.min(ctx.windows.len() - 1)];
            let mut line = Vec::with_capacity(layers);
            for j in 0..layers {
                let lo = if j == 0 { 0.0 } else { 0.5 * (d[j - 1] + d[j]) };
                let hi = if j + 1 < layers { 0.5 * (d[j] + d[j + 1]) } else { g.s_max };
                let i0 = ((lo / g.hs).ceil() as usize).min(ns - 1);
                let i1 = ((hi / g.hs).ceil() as usize).clamp(i0 + 1, ns);
                let mut phi: Vec<f64> = (i0..i1)
                    .map(|i| {
                        let k = m * ns + i;
                        let down = if i > 0 { ctx.u[k - 1] } else { ctx.u[k + 1] };
                        let up = if i + 1 < ns { ctx.u[k + 1] } else { ctx.u[k] };
                        0.5 * (up - down) / g.hs
                    })
                    .collect();
                let norm = phi.iter().map(|p| p * p).sum::<f64>().sqrt();
                if norm > 0.0 {
                    phi.iter_mut().for_each(|p| *p /= norm);
                }
                line.push((i0, phi));
            }
            self.basis.push(line);
        }
        // Galerkin blocks PᵀJP
        let mut bt = BlockTridiagonal::zeros(nz, layers);
        let line_apply = |m: usize, start: usize, phi: &[f64]| -> Vec<f64> {
            let mut full = vec![0.0; ns];
            full[start..start + phi.len()].copy_from_slice(phi);
            (0..ns)
                .map(|i| {
                    let k = m * ns + i;
                    let mut a = jac.diag[k] * full[i];
                    if i > 0 {
                        a += jac.lower[k] * full[i - 1];
                    }
                    if i + 1 < ns {
                        a += jac.upper[k] * full[i + 1];
                    }
                    a
                })
                .collect()
        };
        let overlap = |m: usize, a: &(usize, Vec<f64>), b: &(usize, Vec<f64>), w: &[f64]| -> f64 {
            let lo = a.0.max(b.0);
            let hi = (a.0 + a.1.len()).min(b.0 + b.1.len());
            (lo..hi).map(|i| a.1[i - a.0] * w[m * ns + i] * b.1[i - b.0]).sum()
        };
        for m in 0..nz {
            let mp = (m + 1) % nz;
            let mm = (m + nz - 1) % nz;
            let mut diag = DMatrix::zeros(layers, layers);
            let mut upper = DMatrix::zeros(layers, layers);
            let mut lower = DMatrix::zeros(layers, layers);
            for jp in 0..layers {
                let (start, phi) = &self.basis[m][jp];
                let jphi = line_apply(m, *start, phi);
                for j in 0..layers {
                    let (s, pj) = &self.basis[m][j];
                    diag[(j, jp)] = pj.iter().enumerate().map(|(a, p)| p * jphi[s + a]).sum();
                    upper[(j, jp)] = overlap(m, &self.basis[m][j], &self.basis[mp][jp], &jac.zp);
                    lower[(j, jp)] = overlap(m, &self.basis[m][j], &self.basis[mm][jp], &jac.zm);
                }
            }
            bt.diag[m] = diag;
            bt.upper[m] = upper;
            bt.lower[m] = lower;
        }
        self.coarse = CyclicBlockTridiagonal(bt).factor();
        if self.coarse.is_none() {
            return Err(PdeError::LinearSolve("coarse translation-mode system is singular".into()));
        }
        Ok(())
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        let jac = self.smoother.jac.as_ref().expect("setup before apply");
        let ns = jac.grid.ns;
        out.iter_mut().for_each(|v| *v = 0.0);
        self.coarse_correct(r, out, ns);
        let mut jx = vec![0.0; r.len()];
        jac.apply(out, &mut jx);
        let res: Vec<f64> = r.iter().zip(&jx).map(|(a, b)| a - b).collect();
        let mut sm = vec![0.0; r.len()];
        self.smoother.sweep(&res, &mut sm);
        out.iter_mut().zip(&sm).for_each(|(o, s)| *o += s);
        jac.apply(out, &mut jx);
        let res: Vec<f64> = r.iter().zip(&jx).map(|(a, b)| a - b).collect();
        self.coarse_correct(&res, out, ns);
    }
}
