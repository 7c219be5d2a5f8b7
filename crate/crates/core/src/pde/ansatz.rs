//! The first approximation u₁: shifted heteroclinic profiles plus their
//! reflections through s = 0, which make the Neumann condition exact.

use crate::placement::Placement;
use crate::profile::h;

use super::grid::{CollarField, StripGrid};
use super::PdeError;

/// Profile widths kept between the deepest layer and the far edge.
pub const FAR_MARGIN: f64 = 10.0;

/// (−1)^N, the value away from the boundary.
pub fn far_value(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// u₁ along one normal line at depths `f` (stretched units):
/// Σ_j (−1)^j [H(β(s − f_j)) − H(β(s + f_j))] + (−1)^N.
pub fn ansatz_profile(s: f64, f: &[f64], beta: f64) -> f64 {
    let mut u = far_value(f.len());
    for (j, &fj) in f.iter().enumerate() {
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        u += sign * (h(beta * (s - fj)) - h(beta * (s + fj)));
    }
    u
}

/// u₁ on the strip; line m uses the placement node m.
pub fn build_u1(grid: &StripGrid, placement: &Placement) -> Result<CollarField, PdeError> {
    if placement.layers.nodes() != grid.nz {
        return Err(PdeError::InvalidGrid(format!(
            "placement has {} nodes but the strip has {} lines",
            placement.layers.nodes(),
            grid.nz
        )));
    }
    let beta_min = placement.beta.iter().copied().fold(f64::INFINITY, f64::min);
    let deepest = placement.layers.max_depth();
    let needed = deepest + FAR_MARGIN / beta_min;
    if needed > grid.s_max {
        return Err(PdeError::LayersOutsideGrid {
            depth: deepest,
            s_max: grid.s_max,
            eps_fit: placement.eps * grid.s_max / needed,
        });
    }
    let depths: Vec<Vec<f64>> = (0..grid.nz).map(|m| placement.layers.at(m)).collect();
    Ok(CollarField::from_fn(*grid, |i, m| {
        ansatz_profile(grid.s(i), &depths[m], placement.beta[m])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn single_layer_values() {
        let f = [2.6];
        // at the layer: H(0) + H(2βf) − 1 ≈ −2e^{−2√2βf}
        let v = ansatz_profile(2.6, &f, 1.0);
        let approx = -2.0 * (-2.0 * SQRT_2 * 2.6f64).exp();
        assert!((v - approx).abs() < 0.05 * approx.abs());
        assert!((ansatz_profile(40.0, &f, 1.0) + 1.0).abs() < 1e-12);
        assert!(ansatz_profile(0.0, &f, 1.0) > 0.9);
    }

    #[test]
    fn profile_is_even_and_bounded() {
        let f = [2.0, 6.0, 11.0];
        for k in 0..200 {
            let s = 0.1 * k as f64;
            let v = ansatz_profile(s, &f, 1.3);
            assert!((v - ansatz_profile(-s, &f, 1.3)).abs() < 1e-15);
            assert!(v.abs() <= 1.0 + 1e-6);
        }
        assert!((ansatz_profile(40.0, &f, 1.3) - far_value(3)).abs() < 1e-12);
    }
}
