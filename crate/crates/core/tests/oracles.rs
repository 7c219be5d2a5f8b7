//! Derived quantities checked against routes that share no code with the solvers.

use std::f64::consts::{PI, SQRT_2};

use approx::assert_relative_eq;
use layercluster::experiment::criteria::barf_fixed_point;
use layercluster::placement::{predicted_positions, solve_barf, GammaWeights};
use layercluster::profile::{h, hx, profile_integrals, GAMMA0, GAMMA1};
use layercluster::strip_linear::LinearStrip;

/// Composite Simpson on [−w, w], written out independently of the library quadrature.
fn simpson(f: impl Fn(f64) -> f64, w: f64, n: usize) -> f64 {
    let step = 2.0 * w / n as f64;
    let mut sum = f(-w) + f(w);
    for i in 1..n {
        let x = -w + i as f64 * step;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    sum * step / 3.0
}

#[test]
fn profile_constants_match_simpson() {
    let g0 = simpson(|x| hx(x).powi(2), 30.0, 20_000);
    assert_relative_eq!(g0, GAMMA0, max_relative = 1e-12);
    let ints = profile_integrals();
    assert_relative_eq!(ints.gamma0, g0, max_relative = 1e-10);
    assert_relative_eq!(h(0.7), (0.7 / SQRT_2).tanh(), max_relative = 1e-15);
}

#[test]
fn offsets_newton_matches_gap_fixed_point() {
    for &(n, beta, curv) in &[(1, 1.0, 1.0), (2, 1.0, 1.0), (3, 1.3, 0.7), (4, 0.8, 2.5)] {
        let newton = solve_barf(n, beta, curv, &GammaWeights::unweighted(n), 0.0).unwrap();
        let jacobi = barf_fixed_point(n, beta, curv);
        for (a, b) in newton.bar_f.iter().zip(&jacobi) {
            assert!((a - b).abs() < 1e-10, "N={n}: newton {a} vs fixed point {b}");
        }
    }
}

#[test]
fn predicted_spacing_closed_form() {
    let p = predicted_positions(2, 0.01, 1.0, 1.0).unwrap();
    let expected = ((1.0f64 / 0.01).ln() + (9.0 * GAMMA1).ln()) / SQRT_2;
    assert_relative_eq!(p.spacings[0], expected, max_relative = 1e-14);
    assert!((p.spacings[0] - 5.2585).abs() < 1e-4);
}

/// Applies the discrete operator to a known field and recovers it with the solver.
#[test]
fn discrete_manufactured_recovery() {
    let beta: Vec<f64> = (0..32).map(|i| 1.0 + 0.15 * (2.0 * PI * i as f64 / 32.0).cos()).collect();
    let strip = LinearStrip::new(0.05, 2.0 * PI, &beta, 201, 12.0, 32).unwrap();
    let w = 2.0 * PI * strip.eps() / strip.length();
    let mut exact = strip.field(|x, z| (-x * x / 4.0).exp() * (1.0 + 0.5 * (w * z).sin()) + x * hx(x) * (2.0 * w * z).cos());
    // make each slice discretely orthogonal to H_x
    let hx_field = strip.field(|x, _| hx(x));
    let nx = strip.nx();
    let norm = strip.hx_moment(hx_field.slice(0));
    for m in 0..strip.nz() {
        let c = strip.hx_moment(exact.slice(m)) / norm;
        for i in 0..nx {
            exact.values[m * nx + i] -= c * hx_field.values[m * nx + i];
        }
    }
    let rhs = strip.apply(&exact);
    let sol = strip.solve(&rhs).unwrap();
    let err = sol
        .field
        .values
        .iter()
        .zip(&exact.values)
        .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
    assert!(err < 1e-8, "recovery error {err:e}");
    assert!(sol.residual < 1e-8);
}
