//! Collar grids: the stretched strip (s, z) and the graded radial grid.

use serde::Serialize;

use super::PdeError;

/// Largest admissible normal step in stretched units.
pub const MAX_STRIP_STEP: f64 = 0.15;

/// Uniform grid on (0, s_max) × [0, z_period). Unknowns sit at s_i = i·h_s for
/// i < ns; the Dirichlet node is s_ns = s_max. Line m holds z_m = m·h_z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripGrid {
    pub ns: usize,
    pub nz: usize,
    pub hs: f64,
    pub hz: f64,
    pub s_max: f64,
    pub z_period: f64,
}

impl StripGrid {
    pub fn new(ns: usize, nz: usize, s_max: f64, z_period: f64) -> Result<Self, PdeError> {
        if ns < 8 || nz < 3 {
            return Err(PdeError::InvalidGrid(format!("need ns ≥ 8 and nz ≥ 3, got {ns}×{nz}")));
        }
        if !(s_max > 0.0 && z_period > 0.0) {
            return Err(PdeError::InvalidGrid(format!("extents must be positive: s_max = {s_max}, period = {z_period}")));
        }
        let hs = s_max / ns as f64;
        if hs > MAX_STRIP_STEP {
            return Err(PdeError::InvalidGrid(format!(
                "normal step h_s = {hs:.4} exceeds {MAX_STRIP_STEP}; use ns ≥ {}",
                (s_max / MAX_STRIP_STEP).ceil()
            )));
        }
        Ok(Self {
            ns,
            nz,
            hs,
            hz: z_period / nz as f64,
            s_max,
            z_period,
        })
    }

    pub fn len(&self) -> usize {
        self.ns * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.hs
    }

    #[inline]
    pub fn z(&self, m: usize) -> f64 {
        m as f64 * self.hz
    }

    #[inline]
    pub fn index(&self, i: usize, m: usize) -> usize {
        m * self.ns + i
    }
}

/// Grid function on a [`StripGrid`], stored line by line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollarField {
    pub grid: StripGrid,
    pub values: Vec<f64>,
}

impl CollarField {
    pub fn zeros(grid: StripGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: StripGrid, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for m in 0..grid.nz {
            for i in 0..grid.ns {
                values.push(f(i, m));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, m: usize) -> f64 {
        self.values[self.grid.index(i, m)]
    }

    pub fn line(&self, m: usize) -> &[f64] {
        &self.values[m * self.grid.ns..(m + 1) * self.grid.ns]
    }

    /// Flat CSV with columns s, z, value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,z,u\n");
        for m in 0..self.grid.nz {
            for i in 0..self.grid.ns {
                out.push_str(&format!("{:.10e},{:.10e},{:.15e}\n", self.grid.s(i), self.grid.z(m), self.at(i, m)));
            }
        }
        out
    }
}

/// Nodes r_0 = 0 < … < r_n = 1 refined towards r = 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGrid {
    pub r: Vec<f64>,
    pub eps: f64,
    /// Depth 1 − r of the uniformly refined collar.
    pub collar: f64,
}

impl RadialGrid {
    /// Step `collar_step` on 1 − r ≤ `collar`, then geometric growth by at most
    /// `growth` per cell up to `max_step`.
    pub fn graded(eps: f64, collar: f64, collar_step: f64, growth: f64, max_step: f64) -> Result<Self, PdeError> {
        if !(eps > 0.0 && collar > 0.0 && collar < 1.0 && collar_step > 0.0 && growth >= 1.0 && max_step >= collar_step) {
            return Err(PdeError::InvalidGrid(format!(
                "radial grid needs 0 < collar < 1 and positive steps (collar = {collar}, step = {collar_step})"
            )));
        }
        let mut t = vec![0.0];
        let mut h = collar_step;
        let mut cur = 0.0;
        while cur < 1.0 {
            if cur >= collar {
                h = (h * growth).min(max_step);
            }
            cur += h;
            if cur > 1.0 - 0.5 * h {
                cur = 1.0;
            }
            t.push(cur);
        }
        let r: Vec<f64> = t.iter().rev().map(|t| 1.0 - t).collect();
        Ok(Self { r, eps, collar })
    }

    /// Default grading: collar step ε/16 over the predicted layer zone, growth 1.05.
    pub fn for_layers(eps: f64, deepest: f64) -> Result<Self, PdeError> {
        let collar = (eps * (deepest + 12.0)).min(0.9);
        Self::graded(eps, collar, eps / 16.0, 1.05, 0.02)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Largest step inside the collar.
    pub fn collar_resolution(&self) -> f64 {
        self.r
            .windows(2)
            .filter(|w| 1.0 - w[0] <= self.collar)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strip_grid_rejects_coarse_normal_step() {
        assert!(StripGrid::new(100, 16, 20.0, 50.0).is_err());
        let g = StripGrid::new(200, 16, 20.0, 48.0).unwrap();
        assert_eq!(g.hs, 0.1);
        assert_eq!(g.hz, 3.0);
        assert_eq!(g.index(3, 2), 403);
    }

    #[test]
    fn radial_grid_is_graded() {
        let g = RadialGrid::for_layers(0.01, 5.0).unwrap();
        assert_eq!(g.r[0], 0.0);
        assert_eq!(*g.r.last().unwrap(), 1.0);
        assert!(g.r.windows(2).all(|w| w[1] > w[0]));
        assert!(g.collar_resolution() <= 0.01 / 8.0);
        // steps shrink towards r = 1; only the merged cell at r = 0 may jump
        let steps: Vec<f64> = g.r.windows(2).map(|w| w[1] - w[0]).collect();
        for (k, w) in steps.windows(2).enumerate() {
            let ratio = w[0] / w[1];
            let (lo, hi) = if k == 0 { (0.45, 1.5) } else { (1.0, 1.05) };
            assert!(ratio <= hi + 1e-9 && ratio >= lo - 1e-9, "ratio {ratio} at {k}");
        }
    }
}
