//! LOESS against a straightforward weighted least-squares fit solved by SVD.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use replimarket::dynamics::{loess, LoessConfig};

fn oracle(xs: &[f64], ys: &[f64], span: f64, degree: usize) -> Vec<f64> {
    let n = xs.len();
    let q = ((span * n as f64).floor() as usize).max(degree + 2).min(n);
    xs.iter()
        .map(|&x0| {
            let mut d: Vec<f64> = xs.iter().map(|x| (x - x0).abs()).collect();
            d.sort_by(f64::total_cmp);
            let h = d[q - 1];
            let sw: Vec<f64> = xs
                .iter()
                .map(|x| {
                    let u = (x - x0).abs() / h;
                    if u < 1.0 {
                        (1.0 - u.powi(3)).powi(3).sqrt()
                    } else {
                        0.0
                    }
                })
                .collect();
            let a = DMatrix::from_fn(n, degree + 1, |i, j| sw[i] * (xs[i] - x0).powi(j as i32));
            let b = DVector::from_fn(n, |i, _| sw[i] * ys[i]);
            let beta = a.svd(true, true).solve(&b, 1e-14).unwrap();
            beta[0]
        })
        .collect()
}

fn curve() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (8usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05..3.0f64, n),
            prop::collection::vec(-0.2..0.2f64, n),
            0.1..0.9f64,
            0.5..40.0f64,
        )
            .prop_map(|(steps, noise, level, scale)| {
                let mut x = 0.0;
                let xs: Vec<f64> = steps
                    .iter()
                    .map(|s| {
                        x += s;
                        x
                    })
                    .collect();
                let ys = xs
                    .iter()
                    .zip(&noise)
                    .map(|(x, e)| level + 0.3 * (-x / scale).exp() + 0.05 * (x / scale).sin() + e)
                    .collect();
                (xs, ys)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matches_weighted_least_squares((xs, ys) in curve(), span in 0.2..=1.0f64, degree in 1usize..=2) {
        let cfg = LoessConfig { span, degree, ..LoessConfig::default() };
        let got = loess(&xs, &ys, &cfg).unwrap();
        let want = oracle(&xs, &ys, span, degree);
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            prop_assert!((g - w).abs() <= 1e-9, "point {i}: {g} vs {w}");
        }
    }

    #[test]
    fn reproduces_constants_and_lines((xs, _) in curve(), span in 0.2..=1.0f64, degree in 1usize..=2,
                                      c in -2.0..2.0f64, m in -0.1..0.1f64) {
        let cfg = LoessConfig { span, degree, ..LoessConfig::default() };
        let flat = vec![c; xs.len()];
        for v in loess(&xs, &flat, &cfg).unwrap() {
            prop_assert!((v - c).abs() <= 1e-9);
        }
        let line: Vec<f64> = xs.iter().map(|x| c + m * x).collect();
        for (v, y) in loess(&xs, &line, &cfg).unwrap().iter().zip(&line) {
            prop_assert!((v - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn quadratic_fit_reproduces_parabolas() {
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 0.2 - 0.03 * x + 0.004 * x * x).collect();
    let got = loess(&xs, &ys, &LoessConfig::default()).unwrap();
    for (g, y) in got.iter().zip(&ys) {
        assert!((g - y).abs() < 1e-12);
    }
}

#[test]
fn rejects_bad_configs() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
    for cfg in [
        LoessConfig { span: 0.0, ..LoessConfig::default() },
        LoessConfig { span: 1.5, ..LoessConfig::default() },
        LoessConfig { degree: 3, ..LoessConfig::default() },
    ] {
        assert!(loess(&xs, &xs, &cfg).is_err());
    }
    assert!(loess(&xs[..3], &xs[..3], &LoessConfig::default()).is_err());
}
