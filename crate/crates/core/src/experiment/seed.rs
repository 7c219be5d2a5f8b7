//! Warm starts: a strip solution resampled onto another grid or ε.
//!
//! Fields are matched in (s, θ) with θ = εz, so a solution at 2ε seeds ε with
//! its layers at the same stretched depths.

use std::fs;
use std::path::Path;

use crate::pde::{far_value, CollarField, StripGrid};

use super::{ExperimentError, RunRecord};

#[derive(Debug, Clone)]
pub struct SeedField {
    pub eps: f64,
    pub n: usize,
    pub grid: StripGrid,
    pub values: Vec<f64>,
}

impl SeedField {
    pub fn from_field(field: &CollarField, eps: f64, n: usize) -> Self {
        Self {
            eps,
            n,
            grid: field.grid,
            values: field.values.clone(),
        }
    }

    /// Loads the finest-ε strip solution of a previous `solve-strip` run.
    pub fn load(run_dir: &Path) -> Result<Self, ExperimentError> {
        let record = RunRecord::load(run_dir)?;
        if record.kind != "solve-strip" {
            return Err(ExperimentError::Seed(format!("{} is a {} run, not solve-strip", run_dir.display(), record.kind)));
        }
        let last = record
            .results
            .iter()
            .rev()
            .find(|r| r.ok)
            .ok_or_else(|| ExperimentError::Seed("seed run has no converged ε".into()))?;
        let path = run_dir.join(super::eps_dir(last.eps)).join("solution.csv");
        let text = fs::read_to_string(&path)?;
        let mut s = Vec::new();
        let mut z = Vec::new();
        let mut values = Vec::new();
        for (k, line) in text.lines().enumerate().skip(1) {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ExperimentError::Seed(format!("{}:{}: {e}", path.display(), k + 1)))?;
            if cols.len() != 3 {
                return Err(ExperimentError::Seed(format!("{}:{}: expected s,z,u", path.display(), k + 1)));
            }
            s.push(cols[0]);
            z.push(cols[1]);
            values.push(cols[2]);
        }
        let ns = z.iter().take_while(|&&v| v == z[0]).count();
        if ns < 2 || values.len() % ns != 0 {
            return Err(ExperimentError::Seed("solution.csv is not a full (s, z) grid".into()));
        }
        let nz = values.len() / ns;
        let hs = s[1] - s[0];
        let hz = if nz > 1 { z[ns] - z[0] } else { 1.0 };
        let grid = StripGrid {
            ns,
            nz,
            hs,
            hz,
            s_max: hs * ns as f64,
            z_period: hz * nz as f64,
        };
        Ok(Self {
            eps: last.eps,
            n: record.config.n,
            grid,
            values,
        })
    }

    /// Bilinear resampling onto `grid` at `eps`; beyond the seed's depth the far
    /// value is used.
    pub fn resample(&self, grid: &StripGrid, eps: f64) -> CollarField {
        let src = &self.grid;
        let far = far_value(self.n);
        let theta_period = self.eps * src.z_period;
        CollarField::from_fn(*grid, |i, m| {
            let s = grid.s(i);
            let theta = (eps * grid.z(m)).rem_euclid(theta_period);
            let zs = theta / self.eps / src.hz;
            let m0 = zs.floor() as usize % src.nz;
            let m1 = (m0 + 1) % src.nz;
            let tz = zs - zs.floor();
            let si = s / src.hs;
            if si > (src.ns - 1) as f64 {
                return far;
            }
            let i0 = (si.floor() as usize).min(src.ns - 2);
            let ts = si - i0 as f64;
            let at = |i: usize, m: usize| self.values[m * src.ns + i];
            let a = at(i0, m0) * (1.0 - ts) + at(i0 + 1, m0) * ts;
            let b = at(i0, m1) * (1.0 - ts) + at(i0 + 1, m1) * ts;
            a * (1.0 - tz) + b * tz
        })
    }
}
