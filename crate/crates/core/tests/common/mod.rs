//! Oracles shared by the integration and acceptance tests. Nothing here calls
//! into the closed-form moment code.
#![allow(dead_code)]

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;
use spotvol::sde::path_rng;

/// Inputs of one bilinear-system moment evaluation.
#[derive(Debug, Clone, Copy)]
pub struct MomentCase {
    pub x_s: f64,
    pub y_s: f64,
    pub y1_s: f64,
    pub alpha_s: f64,
    pub a: f64,
    pub c: f64,
    pub dt: f64,
}

/// `[mean_x, mean_y, v11, v12, v22]`
pub type Moments5 = [f64; 5];

/// Exact moments from the linear ODE for `(E X, E Y, V11, V12, V22, 1)`:
/// the mean follows `A m + beta`, the covariance `A V + V A' + E[Y] (1, y1)(1, y1)'`.
pub fn moments_by_ode(k: &MomentCase) -> Moments5 {
    let (a, c, y1, al) = (k.a, k.c, k.y1_s, k.alpha_s);
    let b = a * y1;
    #[rustfmt::skip]
    let m = SMatrix::<f64, 6, 6>::from_row_slice(&[
        a,   0.0, 0.0,     0.0,     0.0,     al,
        b,   c,   0.0,     0.0,     0.0,     al * y1,
        0.0, 1.0, 2.0 * a, 0.0,     0.0,     0.0,
        0.0, y1,  b,       a + c,   0.0,     0.0,
        0.0, y1 * y1, 0.0, 2.0 * b, 2.0 * c, 0.0,
        0.0, 0.0, 0.0,     0.0,     0.0,     0.0,
    ]);
    let z0 = SVector::<f64, 6>::from_row_slice(&[k.x_s, k.y_s, 0.0, 0.0, 0.0, 1.0]);
    let z = (m * k.dt).exp() * z0;
    [z[0], z[1], z[2], z[3], z[4]]
}

/// Sample moments and their standard errors.
#[derive(Debug, Clone, Copy)]
pub struct McMoments {
    pub value: Moments5,
    pub se: Moments5,
}

/// Fine-step Euler Monte Carlo of the bilinear system
/// `dX = (alpha + a X) dt + sqrt(Y) dB`, `dY = y1 dX + c Y dt`.
pub fn moments_by_mc(k: &MomentCase, n_paths: usize, substeps: usize, seed: u64) -> McMoments {
    let h = k.dt / substeps as f64;
    let sh = h.sqrt();
    let mut rng = path_rng(seed, 0);
    let mut xs = Vec::with_capacity(n_paths);
    let mut ys = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let (mut x, mut y) = (k.x_s, k.y_s);
        for _ in 0..substeps {
            let z: f64 = rng.sample(StandardNormal);
            let dx = (k.alpha_s + k.a * x) * h + y.max(0.0).sqrt() * sh * z;
            y += k.y1_s * dx + k.c * y * h;
            x += dx;
        }
        xs.push(x);
        ys.push(y);
    }
    let n = n_paths as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut acc = [0.0f64; 3];
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        acc[0] += dx * dx;
        acc[1] += dx * dy;
        acc[2] += dy * dy;
    }
    let cov = [acc[0] / (n - 1.0), acc[1] / (n - 1.0), acc[2] / (n - 1.0)];
    // standard errors of the second moments from the spread of the products
    let mut spread = [0.0f64; 3];
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        spread[0] += (dx * dx - cov[0]).powi(2);
        spread[1] += (dx * dy - cov[1]).powi(2);
        spread[2] += (dy * dy - cov[2]).powi(2);
    }
    let se2 = |s: f64| (s / (n - 1.0) / n).sqrt();
    McMoments {
        value: [mx, my, cov[0], cov[1], cov[2]],
        se: [(cov[0] / n).sqrt(), (cov[2] / n).sqrt(), se2(spread[0]), se2(spread[1]), se2(spread[2])],
    }
}

pub fn closed_form(k: &MomentCase) -> Moments5 {
    let m = spotvol::volfilter::MomentKernel::new(k.a, k.c, k.dt).moments(k.x_s, k.y_s, k.y1_s, k.alpha_s);
    [m.mean_x, m.mean_y, m.v1, m.v2, m.v3]
}

/// Relative gap with an absolute guard for entries that are structurally tiny.
pub fn rel_gap(u: f64, v: f64, scale: f64) -> f64 {
    (u - v).abs() / (u.abs().max(v.abs()).max(scale))
}

/// `(mean, standard error)` of the drift slope estimate over 2000-observation
/// segments of `n_paths` lin paths.
pub fn lin_beta_hat_mc(n_paths: u64, seed: u64) -> (f64, f64) {
    use spotvol::{estimation::drift_lse, experiments::summarize, presets, sde::generate_scenario_indexed};
    let lin = presets::table_model("lin").unwrap();
    let sim = presets::table_sim(seed);
    let betas: Vec<f64> = (0..n_paths)
        .map(|i| {
            let path = generate_scenario_indexed(&lin.model, &sim, i).unwrap();
            drift_lse(&path.slice(2000..4000).unwrap()).unwrap().beta_hat
        })
        .collect();
    let s = summarize(&betas).unwrap();
    (s.mean, s.std.unwrap() / (s.n as f64).sqrt())
}

/// Number of quad paths (2000 observations each) with a positive curvature estimate.
pub fn quad_positive_theta_mc(n_paths: u64, seed: u64) -> usize {
    use spotvol::{estimation::*, presets, sde::generate_scenario_indexed};
    let quad = presets::table_model("quad").unwrap();
    let sim = presets::table_sim(seed);
    let search = ThetaSearchConfig::default();
    (0..n_paths)
        .filter(|&i| {
            let path = generate_scenario_indexed(&quad.model, &sim, i).unwrap();
            let est = path.slice(2000..4000).unwrap();
            let drift = drift_lse(&est).unwrap();
            theta_qmle(&est, &drift, &search, presets::init_window_for(presets::TABLE_DT)).unwrap() > 0.0
        })
        .count()
}

/// Every entry within `k` Monte Carlo standard errors.
pub fn within_se(got: Moments5, mc: &McMoments, k: f64) -> Result<(), String> {
    for (i, (&g, (&v, &se))) in got.iter().zip(mc.value.iter().zip(&mc.se)).enumerate() {
        let z = (g - v).abs() / se;
        if z > k {
            return Err(format!("entry {i}: closed form {g:e}, mc {v:e} +- {se:e} ({z:.2} se)"));
        }
    }
    Ok(())
}

/// Randomized configurations in the filter's operating range: small steps and
/// a volatility state large enough that the bilinear `Y~` stays positive.
pub fn random_cases(n: usize, seed: u64) -> Vec<MomentCase> {
    let mut rng = path_rng(seed, 1);
    (0..n)
        .map(|_| {
            let dt = 10f64.powf(rng.random_range(-4.5..-3.0));
            let y_s = 10f64.powf(rng.random_range(-3.5..-1.0));
            let x_s: f64 = rng.random_range(0.0..1.5);
            let a: f64 = rng.random_range(-2.0..1.0);
            let alpha_s: f64 = rng.random_range(-0.5..0.5);
            let c = rng.random_range(-3.0..3.0);
            // keep Y1 dX well below Y~ so that the sqrt(Y) truncation never binds
            let y1_cap = y_s / (8.0 * (y_s * dt).sqrt() + 8.0 * dt * (alpha_s + a * x_s).abs());
            let y1_s = rng.random_range(-1.0..1.0) * y1_cap.min(3.0);
            MomentCase { x_s, y_s, y1_s, alpha_s, a, c, dt }
        })
        .collect()
}

/// Relative gap of the five moments, entry by entry, maximised.
pub fn moment_gap(u: &spotvol::MomentPair, v: &spotvol::MomentPair) -> f64 {
    let pairs = [(u.mean_x, v.mean_x), (u.mean_y, v.mean_y), (u.v1, v.v1), (u.v2, v.v2), (u.v3, v.v3)];
    pairs.iter().map(|&(p, q)| (p - q).abs() / p.abs().max(q.abs()).max(1e-300)).fold(0.0, f64::max)
}

/// `sigma = 0.2`, linear drift.
pub fn const_vol_model() -> spotvol::ModelSpec {
    spotvol::ModelSpec {
        drift_alpha: 0.5,
        drift_beta: -0.5,
        diffusion: spotvol::Diffusion::Power { s0: 0.2, rho: 0.0 },
        x0: 1.0,
    }
}

/// Mean over paths of the final-half time average of the filtered state on
/// 4000 constant-volatility observations at `dt = 1/16000`; `theta` fixed, or
/// estimated when `None`.
pub fn const_vol_final_half_average(n_paths: u64, theta: Option<f64>, seed: u64) -> f64 {
    use spotvol::estimation::{drift_lse, theta_qmle, ThetaSearchConfig};
    use spotvol::volfilter::{run_filter, FilterParams};
    let sim = spotvol::SimConfig {
        gen_dt: 1.0 / 3.2e5,
        sample_dt: 1.0 / 16000.0,
        burn_in_span: 0.0,
        total_span: 3999.0 / 16000.0,
        seed,
    };
    let model = const_vol_model();
    let mut total = 0.0;
    for i in 0..n_paths {
        let path = spotvol::sde::generate_scenario_indexed(&model, &sim, i).unwrap();
        let drift = drift_lse(&path).unwrap();
        let theta = theta.unwrap_or_else(|| theta_qmle(&path, &drift, &ThetaSearchConfig::default(), 401).unwrap());
        let out = run_filter(&path, &FilterParams::new(theta, drift.alpha_hat, drift.beta_hat).unwrap(), 401).unwrap();
        let y = out.series.y_values();
        let half = &y[y.len() / 2..];
        total += half.iter().sum::<f64>() / half.len() as f64;
    }
    total / n_paths as f64
}
