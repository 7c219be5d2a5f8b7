//! Invariants that must hold for every admissible input.

use std::f64::consts::{PI, SQRT_2};

use layercluster::experiment::{ExperimentKind, RunConfig};
use layercluster::placement::{predicted_positions, solve_barf, GammaWeights};
use layercluster::profile::{h, hx, psi};
use layercluster::strip_linear::LinearStrip;
use proptest::prelude::*;

fn strip() -> LinearStrip {
    let beta: Vec<f64> = (0..16).map(|i| 1.0 + 0.1 * (2.0 * PI * i as f64 / 16.0).sin()).collect();
    LinearStrip::new(0.1, 2.0 * PI, &beta, 81, 10.0, 16).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn profile_is_odd(x in -20.0f64..20.0) {
        prop_assert!((h(x) + h(-x)).abs() < 1e-15);
        prop_assert!((hx(x) - hx(-x)).abs() < 1e-15);
        prop_assert!((psi(x) + psi(-x)).abs() < 1e-15);
    }

    #[test]
    fn linear_strip_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, k in 1u32..4, c in 0.2f64..2.0) {
        let s = strip();
        let w = 2.0 * PI * s.eps() / s.length();
        let p1 = s.field(|x, z| (-c * x * x).exp() * (k as f64 * w * z).cos());
        let p2 = s.field(|x, z| x * (-x * x / 3.0).exp() * (w * z).sin());
        let sum = s.field(|x, z| {
            a * (-c * x * x).exp() * (k as f64 * w * z).cos() + b * x * (-x * x / 3.0).exp() * (w * z).sin()
        });
        let u1 = s.solve(&p1).unwrap().field;
        let u2 = s.solve(&p2).unwrap().field;
        let us = s.solve(&sum).unwrap().field;
        let scale = 1.0 + us.max_abs();
        for i in 0..us.values.len() {
            let lin = a * u1.values[i] + b * u2.values[i];
            prop_assert!((us.values[i] - lin).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn offsets_shift_under_curvature_scaling(n in 1usize..5, beta in 0.6f64..1.6, curv in 0.3f64..3.0, lam in 0.5f64..2.0) {
        let w = GammaWeights::unweighted(n);
        let base = solve_barf(n, beta, curv, &w, 0.0).unwrap().bar_f;
        let scaled = solve_barf(n, beta, lam * curv, &w, 0.0).unwrap().bar_f;
        let k = SQRT_2 * beta;
        for j in 0..n {
            let shift = -((2 * j + 1) as f64) * lam.ln() / (2.0 * k);
            prop_assert!((scaled[j] - base[j] - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn depths_depend_on_eps_times_curvature(n in 1usize..5, beta in 0.6f64..1.6, curv in 0.3f64..3.0, lam in 0.5f64..2.0) {
        let eps = 1e-3;
        let a = predicted_positions(n, eps, beta, curv).unwrap();
        let b = predicted_positions(n, eps / lam, beta, lam * curv).unwrap();
        for (x, y) in a.f.iter().zip(&b.f) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn config_round_trips(n in 1usize..6, e0 in 0.005f64..0.05, ratio in 0.3f64..0.9, nodes in 64usize..512, weighted: bool) {
        let mut cfg = RunConfig::new(ExperimentKind::Predict, n, vec![e0, e0 * ratio]);
        cfg.nodes = nodes;
        cfg.gamma_weighted = weighted;
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
