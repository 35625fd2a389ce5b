//! Drift least squares and quasi maximum likelihood for the curvature `theta`.

use crate::error::{Error, Result};
use crate::sde::Path;
use crate::volfilter::{filter_steps, FilterParams};

/// Linear drift `alpha + beta x` fitted by least squares on the exact conditional mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub residual_ss: f64,
}

/// Least squares on `E[X_t | X_s] = X_s + (alpha / beta + X_s)(e^{beta dt} - 1)`.
///
/// The conditional mean is `c0 + c1 X_s` with `c1 = e^{beta dt}` and
/// `c0 = alpha (c1 - 1) / beta`, so the minimizer is the OLS fit of
/// `X_k` on `X_{k-1}` mapped back to `(alpha, beta)`.
pub fn drift_lse(path: &Path) -> Result<DriftEstimate> {
    if path.len() < 3 {
        return Err(Error::InvalidArgument(format!("drift_lse needs at least 3 observations, got {}", path.len())));
    }
    let prev = &path.values[..path.len() - 1];
    let next = &path.values[1..];
    let n = prev.len() as f64;
    let mx = prev.iter().sum::<f64>() / n;
    let my = next.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in prev.iter().zip(next) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::DriftNotIdentified("regressor has zero variance".into()));
    }
    let c1 = sxy / sxx;
    let c0 = my - c1 * mx;
    if !(c1 > 0.0) {
        return Err(Error::DriftNotIdentified(format!("autoregression slope {c1} is not positive")));
    }
    if (c1 - 1.0).abs() < 1e-12 {
        return Err(Error::DriftNotIdentified("autoregression slope is 1".into()));
    }
    let beta_hat = c1.ln() / path.dt;
    let alpha_hat = c0 * beta_hat / (c1 - 1.0);
    let residual_ss = prev.iter().zip(next).map(|(x, y)| (y - c0 - c1 * x).powi(2)).sum();
    Ok(DriftEstimate { alpha_hat, beta_hat, residual_ss })
}

/// Gaussian quasi log-likelihood of the one-step predictions of `X`.
///
/// Sums `-ln(2 pi V_11) / 2 - (X_t - X~_{t|s})^2 / (2 V_11)` over the steps
/// after the init window; steps whose update was skipped are left out.
pub fn log_likelihood(path: &Path, params: &FilterParams, init_window_len: usize) -> Result<f64> {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut sum = 0.0;
    let mut used = 0usize;
    filter_steps(path, params, init_window_len, |s| {
        if !s.updated.skipped {
            let r = s.x_obs - s.pred.mean_x;
            sum += -0.5 * (ln_2pi + s.pred.v1.ln()) - r * r / (2.0 * s.pred.v1);
            used += 1;
        }
    })?;
    if used == 0 {
        return Err(Error::LikelihoodUndefined);
    }
    Ok(sum)
}

/// Search domain for `theta`: log-spaced magnitudes on both signs, then golden-section refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSearchConfig {
    pub theta_min_abs: f64,
    pub theta_max_abs: f64,
    /// Grid magnitudes per sign.
    pub grid_points: usize,
    /// Golden-section evaluations after the grid (at least two when nonzero).
    pub refine_iters: usize,
}

impl Default for ThetaSearchConfig {
    fn default() -> Self {
        Self { theta_min_abs: 1e-4, theta_max_abs: 1e3, grid_points: 41, refine_iters: 40 }
    }
}

impl ThetaSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min_abs > 0.0 && self.theta_min_abs < self.theta_max_abs && self.theta_max_abs.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "theta search needs 0 < theta_min_abs < theta_max_abs, got {} and {}",
                self.theta_min_abs, self.theta_max_abs
            )));
        }
        if self.grid_points < 3 {
            return Err(Error::InvalidArgument(format!("grid_points must be at least 3, got {}", self.grid_points)));
        }
        Ok(())
    }

    /// Grid magnitudes, ascending.
    pub fn magnitudes(&self) -> Vec<f64> {
        let (lo, hi) = (self.theta_min_abs.ln(), self.theta_max_abs.ln());
        let n = self.grid_points;
        (0..n)
            .map(|i| match i {
                0 => self.theta_min_abs,
                _ if i == n - 1 => self.theta_max_abs,
                _ => (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp(),
            })
            .collect()
    }
}

/// Result of a `theta` search.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFit {
    pub theta: f64,
    pub log_likelihood: f64,
    /// Every evaluated candidate with its objective (`None` where it failed), in evaluation order.
    pub evaluations: Vec<(f64, Option<f64>)>,
}

/// `true` when `(theta, value)` beats `best` under the tie-break smallest `|theta|`, then positive.
fn better(theta: f64, value: f64, best: Option<(f64, f64)>) -> bool {
    match best {
        None => true,
        Some((bt, bv)) => {
            if value != bv {
                value > bv
            } else if theta.abs() != bt.abs() {
                theta.abs() < bt.abs()
            } else {
                theta > bt
            }
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `objective` over nonzero `theta`: a symmetric log-spaced grid,
/// then golden-section search in `ln |theta|` between the grid neighbours of
/// the best grid point. Failed evaluations are ignored; the result is the best
/// of all evaluated candidates.
pub fn maximize_theta<F>(search: &ThetaSearchConfig, mut objective: F) -> Result<ThetaFit>
where
    F: FnMut(f64) -> Result<f64>,
{
    search.validate()?;
    let mags = search.magnitudes();
    let mut evaluations = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut eval = |theta: f64, evaluations: &mut Vec<(f64, Option<f64>)>, best: &mut Option<(f64, f64)>| {
        let v = objective(theta).ok().filter(|v| v.is_finite());
        evaluations.push((theta, v));
        if let Some(v) = v {
            if better(theta, v, *best) {
                *best = Some((theta, v));
            }
        }
        v
    };
    for sign in [1.0, -1.0] {
        for &m in &mags {
            eval(sign * m, &mut evaluations, &mut best);
        }
    }
    let Some((grid_theta, _)) = best else {
        return Err(Error::LikelihoodUndefined);
    };
    if search.refine_iters > 0 {
        let sign = grid_theta.signum();
        let i = mags.iter().position(|&m| m == grid_theta.abs()).unwrap_or(0);
        let mut lo = mags[i.saturating_sub(1)].ln();
        let mut hi = mags[(i + 1).min(mags.len() - 1)].ln();
        let mut eval_at = |u: f64, ev: &mut Vec<(f64, Option<f64>)>, b: &mut Option<(f64, f64)>| {
            eval(sign * u.exp(), ev, b).unwrap_or(f64::NEG_INFINITY)
        };
        let mut u1 = hi - INV_PHI * (hi - lo);
        let mut u2 = lo + INV_PHI * (hi - lo);
        let mut f1 = eval_at(u1, &mut evaluations, &mut best);
        let mut f2 = eval_at(u2, &mut evaluations, &mut best);
        for _ in 2..search.refine_iters {
            if f1 >= f2 {
                hi = u2;
                u2 = u1;
                f2 = f1;
                u1 = hi - INV_PHI * (hi - lo);
                f1 = eval_at(u1, &mut evaluations, &mut best);
            } else {
                lo = u1;
                u1 = u2;
                f1 = f2;
                u2 = lo + INV_PHI * (hi - lo);
                f2 = eval_at(u2, &mut evaluations, &mut best);
            }
        }
    }
    let (theta, log_likelihood) = best.expect("grid produced a candidate");
    Ok(ThetaFit { theta, log_likelihood, evaluations })
}

/// Quasi maximum likelihood estimate of `theta` with the drift held at `drift`.
pub fn theta_qmle_fit(
    path: &Path,
    drift: &DriftEstimate,
    search: &ThetaSearchConfig,
    init_window_len: usize,
    base: &FilterParams,
) -> Result<ThetaFit> {
    maximize_theta(search, |theta| {
        let params = FilterParams { theta, alpha_hat: drift.alpha_hat, beta_hat: drift.beta_hat, ..*base };
        log_likelihood(path, &params, init_window_len)
    })
}

/// [`theta_qmle_fit`] with default `Y1_0` and floor, returning only the estimate.
pub fn theta_qmle(
    path: &Path,
    drift: &DriftEstimate,
    search: &ThetaSearchConfig,
    init_window_len: usize,
) -> Result<f64> {
    let base = FilterParams::new(1.0, drift.alpha_hat, drift.beta_hat)?;
    theta_qmle_fit(path, drift, search, init_window_len, &base).map(|f| f.theta)
}
