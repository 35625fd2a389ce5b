mod common;

use common::const_vol_model;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use spotvol::baselines::*;
use spotvol::sde::{generate_scenario_indexed, path_rng, Path, SimConfig};

/// Weighted least squares by an SVD solve of `sqrt(W) D b = sqrt(W) z`.
fn brute_force_wls(pairs: &[(f64, f64)], x0: f64, h: f64) -> (f64, f64) {
    let rows: Vec<_> =
        pairs.iter().map(|&(x, z)| (epanechnikov((x - x0) / h) / h, x - x0, z)).filter(|r| r.0 > 0.0).collect();
    let d = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i].0.sqrt() * if j == 0 { 1.0 } else { rows[i].1 });
    let z = DVector::from_fn(rows.len(), |i, _| rows[i].0.sqrt() * rows[i].2);
    let b = d.svd(true, true).solve(&z, 1e-14).unwrap();
    (b[0], b[1])
}

#[test]
fn fit_matches_brute_force_least_squares() {
    let mut rng = path_rng(42, 0);
    for trial in 0..20 {
        let values: Vec<f64> = (0..51).map(|_| rng.random_range(0.0..1.0)).collect();
        let path = Path::new(0.01, values).unwrap();
        let pairs = regression_pairs(&path);
        assert_eq!(pairs.len(), 50);
        let h = 0.4;
        let x0 = rng.random_range(0.3..0.7);
        let cfg = KernelConfig::new(h).unwrap();
        let (b0, b1) = local_linear_fit(&path, x0, &cfg).unwrap();
        let (w0, w1) = brute_force_wls(&pairs, x0, h);
        assert!((b0 - w0).abs() <= 1e-8 * w0.abs(), "trial {trial}: {b0} vs {w0}");
        assert!((b1 - w1).abs() <= 1e-8 * w1.abs().max(w0.abs()), "trial {trial}: {b1} vs {w1}");
    }
}

#[test]
fn local_linear_recovers_constant_volatility() {
    let sim = SimConfig { gen_dt: 1.0 / 40000.0, sample_dt: 1.0 / 4000.0, burn_in_span: 0.0, total_span: 2.0, seed: 8 };
    let cfg = KernelConfig::new(0.15).unwrap();
    let mut means = Vec::new();
    for i in 0..50 {
        let path = generate_scenario_indexed(&const_vol_model(), &sim, i).unwrap();
        let (lo, hi) = path.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        // interior: states with the full kernel support inside the visited range
        let interior: Vec<f64> = path.values.iter().copied().filter(|&x| x > lo + 0.15 && x < hi - 0.15).collect();
        if interior.is_empty() {
            continue;
        }
        let est: Vec<f64> = local_linear_series(&path, &interior, &cfg).unwrap().into_iter().flatten().collect();
        means.push(est.iter().sum::<f64>() / est.len() as f64);
    }
    assert!(means.len() >= 30, "only {} paths had interior points", means.len());
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    assert!((avg / 0.04 - 1.0).abs() < 0.15, "average estimate {avg}");
}

#[test]
fn realized_vol_matches_quadratic_variation() {
    let sim = SimConfig { gen_dt: 1.0 / 3.2e5, sample_dt: 1.0 / 3.2e5, burn_in_span: 0.0, total_span: 0.125, seed: 9 };
    let total: f64 =
        (0..100).map(|i| realized_vol(&generate_scenario_indexed(&const_vol_model(), &sim, i).unwrap())).sum();
    let avg = total / 100.0;
    assert!((avg / 5e-3 - 1.0).abs() < 0.1, "average realized volatility {avg}");
}
